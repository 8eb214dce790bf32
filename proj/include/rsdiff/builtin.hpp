#pragma once

// Builtin coefficient families selectable from a JSON model config, plus the
// two-state benchmark model (OU state coupled to a drift-perturbed OU state
// through a trigonometrically perturbed rate matrix).
//
// Config schema:
// {
//   "dim": 1, "n_states": 2,
//   "family": {"name": "constant_sigma", "params": {"value": 1.0}},      // or "values": [..]
//   "v":      {"family": "gaussian", "params": {"curvature": 1.0}},
//   "z":      [{"family": "zero"},
//              {"family": "affine", "params": {"slope": 0.5, "offset": 0}},
//              {"family": "tanh",   "params": {"scale": 0.3, "rate": 1}}],
//   "q":      {"base": [[-1,1],[2,-2]], "perturbation": {"family": "none"}},
//   "pi":     [0.5, 0.5]                                                  // optional
// }
// Arbitrary coefficients go through register_* plug-in factories instead.

#include "rsdiff/model.hpp"

#include <json.hpp>

#include <optional>

namespace rsdiff {

using json = nlohmann::json;

/// Per-state affine-Z metadata kept for closed-form moment analysis.
struct AffineZInfo {
    bool is_affine = false;  // true also for Z == 0 (slope = offset = 0)
    double slope = 0.0;
    double offset = 0.0;
};

struct BuiltinModel {
    SwitchingModel model;
    ReferenceMeasure ref;
    QMatrixBounds bounds;
    json config;  // canonicalized input

    bool v_gaussian = false;
    double v_curvature = 0.0;  // Hess V = -c I for the gaussian family
    std::vector<AffineZInfo> z_affine;

    Vec gamma_preset;  // log-Sobolev gamma_k (gaussian V: 2/c)
    Vec beta_preset;   // beta_k (gaussian V: 0)
};

struct ConfigError : ModelError {
    using ModelError::ModelError;
};

BuiltinModel model_from_json(const json& cfg);

/// Benchmark model: N=2, d=1, sigma=1, V(x) = c - x^2/2,
/// Z_1 = 0, Z_2(x) = delta*x (so b_2(x) = -x + sqrt(2)*delta*x),
/// Q(x) = [[-a,a],[b,-b]] + theta * [[-a sin x, a sin x],[b cos x, -b cos x]].
json example_config(double a, double b, double theta, double delta);
BuiltinModel example_model(double a, double b, double theta, double delta);

/// Invariant distribution of a conservative irreducible Q-matrix (pi Q = 0).
Vec invariant_pi(const Mat& q_base);

/// FNV-1a digest of the canonical config dump.
std::string model_hash(const json& config);

// Plug-in registration for compiled user coefficients.
using SigmaFactory = std::function<std::function<void(const Vec&, int, Mat&)>(const json& params, int dim, int n_states)>;
using PotentialFactory = std::function<std::pair<std::function<double(const Vec&)>, std::function<void(const Vec&, Vec&)>>(const json& params, int dim)>;
using ZFactory = std::function<std::function<void(const Vec&, Vec&)>(const json& params, int dim)>;
using QFactory = std::function<std::function<void(const Vec&, Mat&)>(const json& params, int n_states)>;

void register_sigma_family(const std::string& name, SigmaFactory factory);
void register_potential_family(const std::string& name, PotentialFactory factory);
void register_z_family(const std::string& name, ZFactory factory);
void register_q_perturbation_family(const std::string& name, QFactory factory);

}  // namespace rsdiff
