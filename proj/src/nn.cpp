#include "finn/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace finn::nn {

std::size_t Mlp::param_count(const std::vector<int>& widths) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        n += static_cast<std::size_t>(widths[l]) * widths[l + 1];
    return n;
}

void Mlp::register_params(ad::ParamStore& store, std::mt19937_64& rng,
                          bool trainable) const {
    if (widths.size() < 2)
        throw std::invalid_argument("Mlp: need at least two layer widths");
    std::normal_distribution<double> dist(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        int fan_in = widths[l], fan_out = widths[l + 1];
        double sigma = std::sqrt(2.0 / (fan_in + fan_out));
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        for (auto& x : w) x = sigma * dist(rng);
        store.add(prefix + ".W" + std::to_string(l), {fan_in, fan_out},
                  std::move(w), trainable);
    }
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var x, int batch) const {
    if (tape.size(x) != batch * widths.front())
        throw std::invalid_argument("Mlp: input size " + std::to_string(tape.size(x)) +
                                    " does not match batch " + std::to_string(batch) +
                                    " x width " + std::to_string(widths.front()));
    ad::Var h = x;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        ad::Var w = tape.param(prefix + ".W" + std::to_string(l));
        h = tape.matmul(h, w, batch, widths[l], widths[l + 1]);
        bool last = (l + 2 == widths.size());
        if (!last) {
            switch (hidden) {
                case Activation::Tanh: h = tape.tanh_(h); break;
                case Activation::Sigmoid: h = tape.sigmoid(h); break;
                case Activation::Relu: h = tape.relu(h); break;
            }
        }
    }
    switch (output) {
        case OutputTransform::Identity: break;
        case OutputTransform::Positive: h = tape.softplus(h); break;
        case OutputTransform::Sigmoid: h = tape.sigmoid(h); break;
    }
    if (output_scale != 1.0) h = tape.scale(h, output_scale);
    return h;
}

bool adam_step(ad::ParamStore& store, const AdamConfig& cfg, int step_index) {
    if (!store.grads_finite()) return false;
    double bc1 = 1.0 - std::pow(cfg.beta1, step_index);
    double bc2 = 1.0 - std::pow(cfg.beta2, step_index);
    for (std::size_t e = 0; e < store.entry_count(); ++e) {
        auto& entry = store.entry(static_cast<int>(e));
        if (!entry.trainable) continue;
        for (std::size_t i = 0; i < entry.size(); ++i) {
            double g = entry.grad[i];
            entry.adam_m[i] = cfg.beta1 * entry.adam_m[i] + (1.0 - cfg.beta1) * g;
            entry.adam_v[i] = cfg.beta2 * entry.adam_v[i] + (1.0 - cfg.beta2) * g * g;
            double mhat = entry.adam_m[i] / bc1;
            double vhat = entry.adam_v[i] / bc2;
            entry.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    return true;
}

double clip_grad_norm(ad::ParamStore& store, double max_norm) {
    double norm = store.grad_norm();
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (std::size_t e = 0; e < store.entry_count(); ++e) {
            auto& entry = store.entry(static_cast<int>(e));
            if (!entry.trainable) continue;
            for (auto& g : entry.grad) g *= s;
        }
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'F', 'I', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
    // host is little-endian on all supported platforms
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const ad::ParamStore& store, const std::filesystem::path& path,
                     const std::string& config_json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    os.write(kMagic, 4);
    write_le(os, kVersion);
    write_le(os, static_cast<std::uint32_t>(store.entry_count()));
    for (std::size_t e = 0; e < store.entry_count(); ++e) {
        const auto& entry = store.entry(static_cast<int>(e));
        write_le(os, static_cast<std::uint32_t>(entry.name.size()));
        os.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
        write_le(os, static_cast<std::uint32_t>(entry.shape.size()));
        for (int d : entry.shape) write_le(os, static_cast<std::uint64_t>(d));
        os.write(reinterpret_cast<const char*>(entry.value.data()),
                 static_cast<std::streamsize>(entry.value.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());

    nlohmann::ordered_json manifest;
    manifest["format"] = "finn-checkpoint";
    manifest["version"] = kVersion;
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (std::size_t e = 0; e < store.entry_count(); ++e) {
        const auto& entry = store.entry(static_cast<int>(e));
        entries.push_back({{"name", entry.name},
                           {"shape", entry.shape},
                           {"trainable", entry.trainable}});
    }
    manifest["entries"] = entries;
    manifest["config"] = nlohmann::ordered_json::parse(config_json);
    std::ofstream ms(path.string() + ".json");
    ms << manifest.dump(2) << "\n";
}

void load_checkpoint(ad::ParamStore& store, const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path.string());
    auto version = read_le<std::uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " +
                                 std::to_string(version));
    auto count = read_le<std::uint32_t>(is);
    for (std::uint32_t e = 0; e < count; ++e) {
        auto name_len = read_le<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        auto rank = read_le<std::uint32_t>(is);
        std::size_t sz = 1;
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            d = static_cast<int>(read_le<std::uint64_t>(is));
            sz *= static_cast<std::size_t>(d);
        }
        std::vector<double> values(sz);
        is.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(sz * sizeof(double)));
        if (!is) throw std::runtime_error("truncated checkpoint: " + path.string());
        if (store.contains(name)) {
            auto& entry = store.at(name);
            if (entry.shape != shape)
                throw std::runtime_error("checkpoint shape mismatch for '" + name + "'");
            entry.value = std::move(values);
        } else {
            store.add(name, std::move(shape), std::move(values));
        }
    }
}

}  // namespace finn::nn
