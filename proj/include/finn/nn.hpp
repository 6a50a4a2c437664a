#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "finn/ad.hpp"

namespace finn::nn {

enum class Activation { Tanh, Sigmoid, Relu };

/// Transform applied to the last layer's output. Positive (softplus) keeps
/// learned diffusion/retardation coefficients strictly above zero.
enum class OutputTransform { Identity, Positive, Sigmoid };

/// Bias-free feedforward network. Weights live in a ParamStore under
/// "<prefix>.W0", "<prefix>.W1", ... with shapes [widths[l], widths[l+1]].
struct Mlp {
    std::vector<int> widths;
    Activation hidden = Activation::Tanh;
    OutputTransform output = OutputTransform::Identity;
    double output_scale = 1.0;
    std::string prefix;

    static std::size_t param_count(const std::vector<int>& widths);
    std::size_t param_count() const { return param_count(widths); }

    /// Registers weight entries initialized with Xavier-scaled normals.
    void register_params(ad::ParamStore& store, std::mt19937_64& rng,
                         bool trainable = true) const;

    /// x is a row-major [batch x widths.front()] node; returns
    /// [batch x widths.back()].
    ad::Var forward(ad::Tape& tape, ad::Var x, int batch) const;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update over all trainable entries. Returns false (and leaves all
/// parameters untouched) when any trainable gradient is non-finite.
/// step_index is 1-based.
bool adam_step(ad::ParamStore& store, const AdamConfig& cfg, int step_index);

/// Scales all trainable gradients so their global L2 norm is at most
/// max_norm. Returns the pre-clip norm.
double clip_grad_norm(ad::ParamStore& store, double max_norm);

/// Flat binary checkpoint: magic "FINN", version u32, then per entry
/// name length (u32) + UTF-8 name, rank (u32), dims (u64 each), real64
/// values; all little-endian. A sidecar <path>.json manifest lists entry
/// names, shapes, and an optional configuration blob.
void save_checkpoint(const ad::ParamStore& store, const std::filesystem::path& path,
                     const std::string& config_json = "{}");
void load_checkpoint(ad::ParamStore& store, const std::filesystem::path& path);

}  // namespace finn::nn
