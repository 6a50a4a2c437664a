#include "finn/ad.hpp"

#include <cmath>
#include <stdexcept>

namespace finn::ad {

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// ParamStore

int ParamStore::add(std::string name, std::vector<int> shape,
                    std::vector<double> init, bool trainable) {
    if (contains(name))
        throw std::invalid_argument("ParamStore: duplicate entry '" + name + "'");
    std::size_t sz = 1;
    for (int d : shape) sz *= static_cast<std::size_t>(d);
    if (init.size() != sz)
        throw std::invalid_argument("ParamStore: shape/value size mismatch for '" +
                                    name + "'");
    Entry e;
    e.name = std::move(name);
    e.shape = std::move(shape);
    e.value = std::move(init);
    e.grad.assign(sz, 0.0);
    e.adam_m.assign(sz, 0.0);
    e.adam_v.assign(sz, 0.0);
    e.trainable = trainable;
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
}

bool ParamStore::contains(std::string_view name) const {
    return index_of(name) >= 0;
}

int ParamStore::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name == name) return static_cast<int>(i);
    return -1;
}

ParamStore::Entry& ParamStore::at(std::string_view name) {
    int i = index_of(name);
    if (i < 0)
        throw std::invalid_argument("ParamStore: no entry '" + std::string(name) + "'");
    return entries_[i];
}

const ParamStore::Entry& ParamStore::at(std::string_view name) const {
    return const_cast<ParamStore*>(this)->at(name);
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.size();
    return n;
}

std::size_t ParamStore::trainable_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.trainable) n += e.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_)
        std::fill(e.grad.begin(), e.grad.end(), 0.0);
}

double ParamStore::grad_norm() const {
    double s = 0.0;
    for (const auto& e : entries_)
        if (e.trainable)
            for (double g : e.grad) s += g * g;
    return std::sqrt(s);
}

bool ParamStore::grads_finite() const {
    for (const auto& e : entries_)
        if (e.trainable && !all_finite(e.grad)) return false;
    return true;
}

std::vector<double> ParamStore::flatten_values() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const auto& e : entries_)
        out.insert(out.end(), e.value.begin(), e.value.end());
    return out;
}

void ParamStore::assign_values(std::span<const double> flat) {
    if (flat.size() != total_size())
        throw std::invalid_argument("ParamStore: flat size mismatch");
    std::size_t off = 0;
    for (auto& e : entries_) {
        std::copy(flat.begin() + off, flat.begin() + off + e.size(), e.value.begin());
        off += e.size();
    }
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const std::vector<double>& Tape::value(Var v) const {
    return nodes_.at(static_cast<std::size_t>(v.id)).value;
}

double Tape::scalar_value(Var v) const {
    const auto& val = value(v);
    if (val.size() != 1) throw std::logic_error("Tape: node is not a scalar");
    return val[0];
}

int Tape::size(Var v) const { return static_cast<int>(value(v).size()); }

bool Tape::finite(Var v) const { return all_finite(value(v)); }

void Tape::rewind(std::size_t m) {
    if (m > nodes_.size()) throw std::logic_error("Tape: rewind past end");
    while (!gather_nodes_.empty() &&
           static_cast<std::size_t>(gather_nodes_.back()) >= m) {
        gather_nodes_.pop_back();
        gathers_.pop_back();
    }
    nodes_.resize(m);
}

Var Tape::constant(std::vector<double> v) {
    Node n;
    n.op = Op::Const;
    n.value = std::move(v);
    return push(n);
}

Var Tape::param(std::string_view name) {
    if (!params_) throw std::logic_error("Tape: no ParamStore bound");
    int idx = params_->index_of(name);
    if (idx < 0)
        throw std::invalid_argument("Tape: unknown parameter '" + std::string(name) + "'");
    Node n;
    n.op = Op::Param;
    n.aux = idx;
    n.value = params_->entry(idx).value;
    return push(n);
}

static void check_same_size(const std::vector<double>& a,
                            const std::vector<double>& b, const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string("Tape: size mismatch in ") + what);
}

Var Tape::add(Var a, Var b) {
    Node n;
    n.op = Op::Add;
    n.a = a.id;
    n.b = b.id;
    const auto& va = value(a);
    const auto& vb = value(b);
    check_same_size(va, vb, "add");
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] + vb[i];
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    Node n;
    n.op = Op::Sub;
    n.a = a.id;
    n.b = b.id;
    const auto& va = value(a);
    const auto& vb = value(b);
    check_same_size(va, vb, "sub");
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] - vb[i];
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    Node n;
    n.op = Op::Mul;
    n.a = a.id;
    n.b = b.id;
    const auto& va = value(a);
    const auto& vb = value(b);
    check_same_size(va, vb, "mul");
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] * vb[i];
    return push(std::move(n));
}

Var Tape::neg(Var a) {
    Node n;
    n.op = Op::Neg;
    n.a = a.id;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = -va[i];
    return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a.id;
    n.c0 = c;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = c * va[i];
    return push(std::move(n));
}

Var Tape::offset(Var a, double c) {
    Node n;
    n.op = Op::Offset;
    n.a = a.id;
    n.c0 = c;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] + c;
    return push(std::move(n));
}

Var Tape::bmul(Var vec, Var scalar_node) {
    if (size(scalar_node) != 1)
        throw std::invalid_argument("Tape: bmul expects a length-1 second operand");
    Node n;
    n.op = Op::BMul;
    n.a = vec.id;
    n.b = scalar_node.id;
    const auto& va = value(vec);
    double s = value(scalar_node)[0];
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = s * va[i];
    return push(std::move(n));
}

Var Tape::badd(Var vec, Var scalar_node) {
    if (size(scalar_node) != 1)
        throw std::invalid_argument("Tape: badd expects a length-1 second operand");
    Node n;
    n.op = Op::BAdd;
    n.a = vec.id;
    n.b = scalar_node.id;
    const auto& va = value(vec);
    double s = value(scalar_node)[0];
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = va[i] + s;
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b, int nn, int kk, int mm) {
    const auto& va = value(a);
    const auto& vb = value(b);
    if (va.size() != static_cast<std::size_t>(nn) * kk ||
        vb.size() != static_cast<std::size_t>(kk) * mm)
        throw std::invalid_argument("Tape: matmul dimension mismatch");
    Node n;
    n.op = Op::Matmul;
    n.a = a.id;
    n.b = b.id;
    n.i0 = nn;
    n.i1 = kk;
    n.i2 = mm;
    n.value.assign(static_cast<std::size_t>(nn) * mm, 0.0);
    for (int i = 0; i < nn; ++i)
        for (int k = 0; k < kk; ++k) {
            double aik = va[static_cast<std::size_t>(i) * kk + k];
            if (aik == 0.0) continue;
            const double* brow = &vb[static_cast<std::size_t>(k) * mm];
            double* orow = &n.value[static_cast<std::size_t>(i) * mm];
            for (int j = 0; j < mm; ++j) orow[j] += aik * brow[j];
        }
    return push(std::move(n));
}

Var Tape::tanh_(Var a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a.id;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = std::tanh(va[i]);
    return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = a.id;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i)
        n.value[i] = 1.0 / (1.0 + std::exp(-va[i]));
    return push(std::move(n));
}

Var Tape::softplus(Var a) {
    Node n;
    n.op = Op::Softplus;
    n.a = a.id;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
        double x = va[i];
        n.value[i] = x > 30.0 ? x : std::log1p(std::exp(x));
    }
    return push(std::move(n));
}

Var Tape::relu(Var a) {
    Node n;
    n.op = Op::Relu;
    n.a = a.id;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i)
        n.value[i] = va[i] > 0.0 ? va[i] : 0.0;
    return push(std::move(n));
}

Var Tape::pow_(Var a, double e) {
    Node n;
    n.op = Op::Pow;
    n.a = a.id;
    n.c0 = e;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = std::pow(va[i], e);
    return push(std::move(n));
}

Var Tape::recip(Var a) {
    Node n;
    n.op = Op::Recip;
    n.a = a.id;
    const auto& va = value(a);
    n.value.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) n.value[i] = 1.0 / va[i];
    return push(std::move(n));
}

Var Tape::sum(Var a) {
    Node n;
    n.op = Op::Sum;
    n.a = a.id;
    double s = 0.0;
    for (double x : value(a)) s += x;
    n.value = {s};
    return push(std::move(n));
}

Var Tape::slice(Var a, int start, int len) {
    const auto& va = value(a);
    if (start < 0 || len < 0 ||
        static_cast<std::size_t>(start) + len > va.size())
        throw std::invalid_argument("Tape: slice out of range");
    Node n;
    n.op = Op::Slice;
    n.a = a.id;
    n.i0 = start;
    n.i1 = len;
    n.value.assign(va.begin() + start, va.begin() + start + len);
    return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
    Node n;
    n.op = Op::Concat;
    n.a = a.id;
    n.b = b.id;
    const auto& va = value(a);
    const auto& vb = value(b);
    n.i0 = static_cast<int>(va.size());
    n.value.reserve(va.size() + vb.size());
    n.value.insert(n.value.end(), va.begin(), va.end());
    n.value.insert(n.value.end(), vb.begin(), vb.end());
    return push(std::move(n));
}

Var Tape::gather(Var a, GatherMap map) {
    const auto& va = value(a);
    std::size_t m = map.index.size();
    if (map.mult.size() != m || map.add.size() != m)
        throw std::invalid_argument("Tape: inconsistent GatherMap");
    Node n;
    n.op = Op::Gather;
    n.a = a.id;
    n.value.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        n.value[i] = va.at(static_cast<std::size_t>(map.index[i])) * map.mult[i] +
                     map.add[i];
    n.aux = static_cast<int>(gathers_.size());
    gathers_.push_back(std::move(map));
    Var v = push(std::move(n));
    gather_nodes_.push_back(v.id);
    return v;
}

Var Tape::interleave(Var a, Var b) {
    const auto& va = value(a);
    const auto& vb = value(b);
    check_same_size(va, vb, "interleave");
    Node n;
    n.op = Op::Interleave;
    n.a = a.id;
    n.b = b.id;
    n.value.resize(2 * va.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
        n.value[2 * i] = va[i];
        n.value[2 * i + 1] = vb[i];
    }
    return push(std::move(n));
}

Var Tape::column(Var a, int col, int ncols) {
    const auto& va = value(a);
    if (ncols <= 0 || col < 0 || col >= ncols || va.size() % ncols != 0)
        throw std::invalid_argument("Tape: bad column extraction");
    Node n;
    n.op = Op::Column;
    n.a = a.id;
    n.i0 = col;
    n.i1 = ncols;
    std::size_t rows = va.size() / ncols;
    n.value.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) n.value[i] = va[i * ncols + col];
    return push(std::move(n));
}

std::vector<double>& Tape::grad_of(int id, std::size_t sz) {
    auto& g = nodes_[static_cast<std::size_t>(id)].grad;
    if (g.empty()) g.assign(sz, 0.0);
    return g;
}

void Tape::backward(Var root, std::span<const double> seed, bool free_buffers) {
    if (!params_) throw std::logic_error("Tape: backward requires a ParamStore");
    if (nodes_.empty() || !root.valid())
        throw std::logic_error("Tape: backward before any forward pass");
    auto& rn = nodes_.at(static_cast<std::size_t>(root.id));
    if (seed.empty()) {
        rn.grad.assign(rn.value.size(), 1.0);
    } else {
        if (seed.size() != rn.value.size())
            throw std::invalid_argument("Tape: seed size mismatch");
        rn.grad.assign(seed.begin(), seed.end());
    }

    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty()) continue;  // not an ancestor of the root
        const auto& g = n.grad;
        switch (n.op) {
            case Op::Const:
                break;
            case Op::Param: {
                auto& e = params_->entry(n.aux);
                if (e.trainable)
                    for (std::size_t i = 0; i < g.size(); ++i) e.grad[i] += g[i];
                break;
            }
            case Op::Add: {
                auto& ga = grad_of(n.a, g.size());
                auto& gb = grad_of(n.b, g.size());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i];
                    gb[i] += g[i];
                }
                break;
            }
            case Op::Sub: {
                auto& ga = grad_of(n.a, g.size());
                auto& gb = grad_of(n.b, g.size());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i];
                    gb[i] -= g[i];
                }
                break;
            }
            case Op::Mul: {
                const auto& va = nodes_[n.a].value;
                const auto& vb = nodes_[n.b].value;
                auto& ga = grad_of(n.a, g.size());
                auto& gb = grad_of(n.b, g.size());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i] * vb[i];
                    gb[i] += g[i] * va[i];
                }
                break;
            }
            case Op::Neg: {
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
                break;
            }
            case Op::Scale: {
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.c0 * g[i];
                break;
            }
            case Op::Offset: {
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                break;
            }
            case Op::BMul: {
                const auto& va = nodes_[n.a].value;
                double s = nodes_[n.b].value[0];
                auto& ga = grad_of(n.a, g.size());
                auto& gb = grad_of(n.b, 1);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += s * g[i];
                    gb[0] += g[i] * va[i];
                }
                break;
            }
            case Op::BAdd: {
                auto& ga = grad_of(n.a, g.size());
                auto& gb = grad_of(n.b, 1);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i];
                    gb[0] += g[i];
                }
                break;
            }
            case Op::Matmul: {
                int nn = n.i0, kk = n.i1, mm = n.i2;
                const auto& va = nodes_[n.a].value;
                const auto& vb = nodes_[n.b].value;
                auto& ga = grad_of(n.a, va.size());
                auto& gb = grad_of(n.b, vb.size());
                // dA = G * B^T ; dB = A^T * G
                for (int i = 0; i < nn; ++i)
                    for (int j = 0; j < mm; ++j) {
                        double gij = g[static_cast<std::size_t>(i) * mm + j];
                        if (gij == 0.0) continue;
                        for (int k = 0; k < kk; ++k) {
                            ga[static_cast<std::size_t>(i) * kk + k] +=
                                gij * vb[static_cast<std::size_t>(k) * mm + j];
                            gb[static_cast<std::size_t>(k) * mm + j] +=
                                gij * va[static_cast<std::size_t>(i) * kk + k];
                        }
                    }
                break;
            }
            case Op::Tanh: {
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                break;
            }
            case Op::Sigmoid: {
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
                break;
            }
            case Op::Softplus: {
                const auto& va = nodes_[n.a].value;
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] / (1.0 + std::exp(-va[i]));
                break;
            }
            case Op::Relu: {
                const auto& va = nodes_[n.a].value;
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (va[i] > 0.0) ga[i] += g[i];
                break;
            }
            case Op::Pow: {
                const auto& va = nodes_[n.a].value;
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * n.c0 * std::pow(va[i], n.c0 - 1.0);
                break;
            }
            case Op::Recip: {
                auto& ga = grad_of(n.a, g.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] -= g[i] * n.value[i] * n.value[i];
                break;
            }
            case Op::Sum: {
                const auto& va = nodes_[n.a].value;
                auto& ga = grad_of(n.a, va.size());
                for (std::size_t i = 0; i < va.size(); ++i) ga[i] += g[0];
                break;
            }
            case Op::Slice: {
                const auto& va = nodes_[n.a].value;
                auto& ga = grad_of(n.a, va.size());
                for (int i = 0; i < n.i1; ++i)
                    ga[static_cast<std::size_t>(n.i0 + i)] += g[static_cast<std::size_t>(i)];
                break;
            }
            case Op::Concat: {
                const auto& va = nodes_[n.a].value;
                const auto& vb = nodes_[n.b].value;
                auto& ga = grad_of(n.a, va.size());
                auto& gb = grad_of(n.b, vb.size());
                for (std::size_t i = 0; i < va.size(); ++i) ga[i] += g[i];
                for (std::size_t i = 0; i < vb.size(); ++i)
                    gb[i] += g[static_cast<std::size_t>(n.i0) + i];
                break;
            }
            case Op::Gather: {
                const auto& map = gathers_[static_cast<std::size_t>(n.aux)];
                const auto& va = nodes_[n.a].value;
                auto& ga = grad_of(n.a, va.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[static_cast<std::size_t>(map.index[i])] += g[i] * map.mult[i];
                break;
            }
            case Op::Interleave: {
                std::size_t half = g.size() / 2;
                auto& ga = grad_of(n.a, half);
                auto& gb = grad_of(n.b, half);
                for (std::size_t i = 0; i < half; ++i) {
                    ga[i] += g[2 * i];
                    gb[i] += g[2 * i + 1];
                }
                break;
            }
            case Op::Column: {
                const auto& va = nodes_[n.a].value;
                auto& ga = grad_of(n.a, va.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i * static_cast<std::size_t>(n.i1) +
                       static_cast<std::size_t>(n.i0)] += g[i];
                break;
            }
        }
        if (free_buffers) {
            n.grad.clear();
            n.grad.shrink_to_fit();
            n.value.clear();
            n.value.shrink_to_fit();
        } else {
            n.grad.clear();
        }
    }
}

}  // namespace finn::ad
