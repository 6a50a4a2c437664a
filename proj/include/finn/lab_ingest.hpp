#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "finn/evaluator.hpp"
#include "finn/model.hpp"
#include "finn/trainer.hpp"

namespace finn::lab {

/// Geometry and conditions of one experimental soil column. Units are
/// meters, days, and kg/m^3. A zero flow rate with `no_flow_bottom` set
/// models a sealed outlet; otherwise the outlet is a flux-proportional
/// (Cauchy) face whose ghost coefficient defaults to the diffusion
/// coefficient (assumption, overridable via `cauchy_coefficient`).
struct CoreSample {
    std::string id;
    double diffusion = 0.0;      // m^2/day
    double length = 0.0;         // m
    double radius = 0.0;         // m; 0 when not recorded
    double t_end = 0.0;          // days
    double flow_rate = 0.0;      // m^3/day
    double solubility = 0.0;     // top boundary concentration
    double porosity = 0.288;
    double bulk_density = 1957.0;
    bool no_flow_bottom = false;
    double cauchy_coefficient = 0.0;  // 0 picks `diffusion`
};

const std::vector<CoreSample>& core_samples();
const CoreSample& core_sample(const std::string& id);

/// One laboratory reading: concentration at depth `x` (m) and time `t`
/// (days). Breakthrough series sample the outlet over time; profiles sample
/// depth at the final time.
struct Measurement {
    double t = 0.0;
    double x = 0.0;
    double value = 0.0;
};

enum class MeasurementKind { Breakthrough, Profile };

/// Reads "time,location,value" rows (header optional). Malformed rows, times
/// past the core's duration, locations off the column, and negative
/// concentrations are rejected with the offending row number; an empty file
/// is an error.
std::vector<Measurement> ingest_csv(const std::filesystem::path& path,
                                    const CoreSample& core);

/// Breakthrough when every location sits at the outlet, profile when every
/// time equals the core duration; anything else is rejected.
MeasurementKind classify(const std::vector<Measurement>& ms,
                         const CoreSample& core);

/// Sorption model on the core's geometry: dissolved species with known
/// diffusion and a learnable storage divisor, plus the total-concentration
/// diagnostic. A sealed outlet is rejected for breakthrough data.
model::ModelConfig core_model_config(const CoreSample& core, int nx = 26);

/// Maps measurements onto the rollout grid for sparse training. `times` is
/// the returned strictly increasing grid starting at 0.
std::vector<train::Observation> observations(const CoreSample& core,
                                             const std::vector<Measurement>& ms,
                                             MeasurementKind kind, int nx,
                                             std::vector<double>& times);

/// Model predictions at the measurement points (zero initial concentration).
std::vector<double> predict(const model::FinnModel& model, ad::ParamStore& store,
                            const CoreSample& core,
                            const std::vector<Measurement>& ms,
                            MeasurementKind kind,
                            const integrator::IntegratorConfig& integ);

/// Normalized error of a trained store against one core's measurements; used
/// both for the fitted core and for transfer to a different core (rebuild
/// with core_model_config(target) and the same learned storage weights).
double measurement_rmse(const model::FinnModel& model, ad::ParamStore& store,
                        const CoreSample& core,
                        const std::vector<Measurement>& ms,
                        MeasurementKind kind,
                        const integrator::IntegratorConfig& integ);

struct TransferResult {
    double rmse = 0.0;
    std::vector<double> predicted;  // one value per measurement
};

/// Applies parameters trained on one core to a different core's geometry and
/// boundary setup and scores them against that core's measurements. The
/// learned storage function carries over; diffusion, length, duration, and
/// boundaries come from `target`.
TransferResult transfer_evaluate(const ad::ParamStore& trained,
                                 const CoreSample& target,
                                 const std::vector<Measurement>& ms,
                                 MeasurementKind kind,
                                 const integrator::IntegratorConfig& integ);

/// Synthetic breakthrough series from a classical solver with the Freundlich
/// isotherm on the core's geometry; `n` points uniform over (0, t_end].
std::vector<Measurement> synthetic_breakthrough(const CoreSample& core, int n,
                                                int nx = 26);

void export_measurements_csv(const std::vector<Measurement>& ms,
                             const std::filesystem::path& path);

}  // namespace finn::lab
