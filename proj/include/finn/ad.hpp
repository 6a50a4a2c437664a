#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace finn::ad {

/// Named registry of flat real64 parameter arrays with per-entry shapes,
/// trainable flags, gradient buffers, and Adam moment buffers.
class ParamStore {
public:
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::vector<double> value;
        std::vector<double> grad;
        std::vector<double> adam_m;
        std::vector<double> adam_v;
        bool trainable = true;

        std::size_t size() const { return value.size(); }
    };

    int add(std::string name, std::vector<int> shape, std::vector<double> init,
            bool trainable = true);
    bool contains(std::string_view name) const;
    int index_of(std::string_view name) const;  // -1 if absent

    Entry& at(std::string_view name);
    const Entry& at(std::string_view name) const;
    Entry& entry(int idx) { return entries_[idx]; }
    const Entry& entry(int idx) const { return entries_[idx]; }
    std::size_t entry_count() const { return entries_.size(); }

    std::size_t total_size() const;
    std::size_t trainable_size() const;
    void zero_grad();
    double grad_norm() const;
    bool grads_finite() const;

    std::vector<double> flatten_values() const;
    void assign_values(std::span<const double> flat);

private:
    std::vector<Entry> entries_;
};

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Precomputed neighbor lookup: out[i] = src[index[i]] * mult[i] + add[i].
struct GatherMap {
    std::vector<int> index;
    std::vector<double> mult;
    std::vector<double> add;
};

enum class Op : std::uint8_t {
    Const,
    Param,
    Add,
    Sub,
    Mul,
    Neg,
    Scale,    // c0 * x
    Offset,   // x + c0
    BMul,     // vector * scalar-node (b is a length-1 node)
    BAdd,     // vector + scalar-node
    Matmul,   // a [n x k] row-major, b [k x m] -> [n x m]
    Tanh,
    Sigmoid,
    Softplus,
    Relu,
    Pow,      // x^c0 elementwise
    Recip,
    Sum,      // -> length-1
    Slice,    // [i0, i0+len)
    Concat,
    Gather,   // via GatherMap
    Interleave,  // (a, b) -> [a0, b0, a1, b1, ...]
    Column,   // column i0 of row-major [n x i1]
};

/// Reverse-mode tape over dense real64 buffers. Single-threaded; operations
/// append nodes, backward() walks them in reverse and accumulates parameter
/// gradients into the bound ParamStore.
class Tape {
public:
    explicit Tape(ParamStore* params = nullptr) : params_(params) {}

    ParamStore* params() const { return params_; }

    Var constant(std::vector<double> v);
    Var scalar(double v) { return constant({v}); }
    Var param(std::string_view name);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var neg(Var a);
    Var scale(Var a, double c);
    Var offset(Var a, double c);
    Var bmul(Var vec, Var scalar_node);
    Var badd(Var vec, Var scalar_node);
    Var matmul(Var a, Var b, int n, int k, int m);
    Var tanh_(Var a);
    Var sigmoid(Var a);
    Var softplus(Var a);
    Var relu(Var a);
    Var pow_(Var a, double e);
    Var recip(Var a);
    Var sum(Var a);
    Var slice(Var a, int start, int len);
    Var concat(Var a, Var b);
    Var gather(Var a, GatherMap map);
    Var interleave(Var a, Var b);
    Var column(Var a, int col, int ncols);

    const std::vector<double>& value(Var v) const;
    double scalar_value(Var v) const;
    int size(Var v) const;
    bool finite(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t mark() const { return nodes_.size(); }
    void rewind(std::size_t m);
    void clear() { rewind(0); }

    /// Reverse pass seeded with `seed` on `root` (seed length must match the
    /// root buffer, or be empty for an all-ones seed). Requires a bound
    /// ParamStore and at least one recorded node.
    /// free_buffers releases node values/adjoints as soon as they are consumed.
    void backward(Var root, std::span<const double> seed = {},
                  bool free_buffers = false);

private:
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        double c0 = 0.0;
        int i0 = 0, i1 = 0, i2 = 0;  // op-specific ints (dims, slice bounds)
        int aux = -1;                // gather map or param entry index
        std::vector<double> value;
        std::vector<double> grad;
    };

    Var push(Node n);
    std::vector<double>& grad_of(int id, std::size_t sz);

    ParamStore* params_ = nullptr;
    std::vector<Node> nodes_;
    std::vector<GatherMap> gathers_;
    std::vector<int> gather_nodes_;  // creating node id per gather map
};

bool all_finite(std::span<const double> v);

}  // namespace finn::ad
