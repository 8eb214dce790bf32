#include "rsdiff/builtin.hpp"

#include <cmath>
#include <map>

namespace rsdiff {

namespace {

std::map<std::string, SigmaFactory>& sigma_registry() {
    static std::map<std::string, SigmaFactory> r;
    return r;
}
std::map<std::string, PotentialFactory>& potential_registry() {
    static std::map<std::string, PotentialFactory> r;
    return r;
}
std::map<std::string, ZFactory>& z_registry() {
    static std::map<std::string, ZFactory> r;
    return r;
}
std::map<std::string, QFactory>& q_registry() {
    static std::map<std::string, QFactory> r;
    return r;
}

const json& params_of(const json& spec) {
    static const json empty = json::object();
    auto it = spec.find("params");
    return it == spec.end() ? empty : *it;
}

double param(const json& p, const char* key, std::optional<double> fallback = std::nullopt) {
    auto it = p.find(key);
    if (it == p.end()) {
        if (fallback) return *fallback;
        throw ConfigError(std::string("missing parameter '") + key + "'");
    }
    return it->get<double>();
}

Mat parse_matrix(const json& m, int n) {
    if (!m.is_array() || static_cast<int>(m.size()) != n)
        throw ConfigError("q.base must be an NxN array");
    Mat out(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(m[i].size()) != n) throw ConfigError("q.base must be an NxN array");
        for (int j = 0; j < n; ++j) out(i, j) = m[i][j].get<double>();
    }
    return out;
}

}  // namespace

void register_sigma_family(const std::string& name, SigmaFactory f) { sigma_registry()[name] = std::move(f); }
void register_potential_family(const std::string& name, PotentialFactory f) { potential_registry()[name] = std::move(f); }
void register_z_family(const std::string& name, ZFactory f) { z_registry()[name] = std::move(f); }
void register_q_perturbation_family(const std::string& name, QFactory f) { q_registry()[name] = std::move(f); }

Vec invariant_pi(const Mat& q_base) {
    const int n = static_cast<int>(q_base.rows());
    // pi Q = 0, sum pi = 1  ->  replace last column equation by normalization
    Mat m = q_base.transpose();
    m.row(n - 1).setOnes();
    Vec rhs = Vec::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::FullPivLU<Mat> lu(m);
    if (!lu.isInvertible())
        throw ConfigError("base Q has no unique invariant distribution (reducible?)");
    Vec pi = lu.solve(rhs);
    if (pi.minCoeff() <= 0.0)
        throw ConfigError("base Q invariant distribution is not strictly positive");
    return pi;
}

std::string model_hash(const json& config) {
    const std::string dump = config.dump();
    std::uint64_t h = UINT64_C(0xcbf29ce484222325);
    for (unsigned char c : dump) {
        h ^= c;
        h *= UINT64_C(0x100000001b3);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

BuiltinModel model_from_json(const json& cfg) {
    BuiltinModel out;
    out.config = cfg;

    const int d = cfg.at("dim").get<int>();
    const int n = cfg.at("n_states").get<int>();
    if (d < 1) throw ConfigError("dim must be >= 1");
    if (n < 1) throw ConfigError("n_states must be >= 1");
    out.model.dim = d;
    out.model.n_states = n;

    // diffusion family
    const json& fam = cfg.at("family");
    const std::string sigma_name = fam.at("name").get<std::string>();
    if (sigma_name == "constant_sigma") {
        const json& p = params_of(fam);
        std::vector<double> values;
        if (p.contains("values")) {
            values = p.at("values").get<std::vector<double>>();
            if (static_cast<int>(values.size()) != n)
                throw ConfigError("constant_sigma.values must have n_states entries");
        } else {
            values.assign(n, param(p, "value", 1.0));
        }
        out.model.sigma = [values](const Vec&, int k, Mat& m) {
            m.setZero();
            m.diagonal().setConstant(values[k - 1]);
        };
        out.model.div_a = [](const Vec&, int, Vec& v) { v.setZero(); };
    } else if (auto it = sigma_registry().find(sigma_name); it != sigma_registry().end()) {
        out.model.sigma = it->second(params_of(fam), d, n);
    } else {
        throw ConfigError("unknown diffusion family '" + sigma_name + "'");
    }

    // potential
    const json& vspec = cfg.at("v");
    const std::string v_name = vspec.at("family").get<std::string>();
    if (v_name == "gaussian") {
        const double c = param(params_of(vspec), "curvature", 1.0);
        if (c <= 0.0) throw ConfigError("gaussian potential needs curvature > 0");
        const double c0 = -0.5 * d * std::log(2.0 * M_PI / c);
        out.model.potential = [c, c0](const Vec& x) { return c0 - 0.5 * c * x.squaredNorm(); };
        out.model.grad_potential = [c](const Vec& x, Vec& g) { g = -c * x; };
        out.v_gaussian = true;
        out.v_curvature = c;
        out.gamma_preset = Vec::Constant(n, 2.0 / c);
        out.beta_preset = Vec::Zero(n);
    } else if (auto it = potential_registry().find(v_name); it != potential_registry().end()) {
        auto [pot, grad] = it->second(params_of(vspec), d);
        out.model.potential = std::move(pot);
        out.model.grad_potential = std::move(grad);
    } else {
        throw ConfigError("unknown potential family '" + v_name + "'");
    }

    // singular drift parts, one spec per state
    const json& zlist = cfg.at("z");
    if (!zlist.is_array() || static_cast<int>(zlist.size()) != n)
        throw ConfigError("z must be an array with one entry per state");
    out.z_affine.resize(n);
    std::vector<std::function<void(const Vec&, Vec&)>> z_fns(n);
    for (int k = 0; k < n; ++k) {
        const json& zs = zlist[k];
        const std::string z_name = zs.at("family").get<std::string>();
        const json& p = params_of(zs);
        if (z_name == "zero") {
            z_fns[k] = [](const Vec&, Vec& v) { v.setZero(); };
            out.z_affine[k] = {true, 0.0, 0.0};
        } else if (z_name == "affine") {
            const double slope = param(p, "slope", 0.0);
            const double offset = param(p, "offset", 0.0);
            z_fns[k] = [slope, offset](const Vec& x, Vec& v) {
                v = slope * x;
                v.array() += offset;
            };
            out.z_affine[k] = {true, slope, offset};
        } else if (z_name == "tanh") {
            const double scale = param(p, "scale", 1.0);
            const double rate = param(p, "rate", 1.0);
            z_fns[k] = [scale, rate](const Vec& x, Vec& v) {
                v = (rate * x.array()).tanh() * scale;
            };
            out.z_affine[k] = {false, 0.0, 0.0};
        } else if (auto it = z_registry().find(z_name); it != z_registry().end()) {
            z_fns[k] = it->second(p, d);
            out.z_affine[k] = {false, 0.0, 0.0};
        } else {
            throw ConfigError("unknown z family '" + z_name + "'");
        }
    }
    out.model.z = [z_fns](const Vec& x, int k, Vec& v) { z_fns[k - 1](x, v); };

    // rate matrix field
    const json& qspec = cfg.at("q");
    const Mat base = parse_matrix(qspec.at("base"), n);
    std::string pert_name = "none";
    if (qspec.contains("perturbation")) pert_name = qspec["perturbation"].at("family").get<std::string>();

    if (pert_name == "none") {
        out.model.q_field = [base](const Vec&, Mat& q) { q = base; };
        out.bounds.q_bar = base;
        out.bounds.q_hat = base;
        out.bounds.c_q = QMatrixSample{base, Vec()}.exit_rates().maxCoeff();
        out.bounds.exact = true;
    } else if (pert_name == "example_trig") {
        if (n != 2) throw ConfigError("example_trig perturbation requires n_states == 2");
        const double theta = param(params_of(qspec["perturbation"]), "theta", 0.0);
        if (theta < 0.0 || theta >= 1.0) throw ConfigError("example_trig: theta in [0,1) required");
        const double a = base(0, 1), b = base(1, 0);
        out.model.q_field = [a, b, theta](const Vec& x, Mat& q) {
            const double ax = theta * a * std::sin(x(0));
            const double bx = theta * b * std::cos(x(0));
            q(0, 0) = -(a + ax);
            q(0, 1) = a + ax;
            q(1, 0) = b + bx;
            q(1, 1) = -(b + bx);
        };
        out.bounds.q_bar.resize(2, 2);
        out.bounds.q_hat.resize(2, 2);
        out.bounds.q_bar << -(1.0 - theta) * a, (1.0 + theta) * a, (1.0 + theta) * b, -(1.0 - theta) * b;
        out.bounds.q_hat << -(1.0 + theta) * a, (1.0 - theta) * a, (1.0 - theta) * b, -(1.0 + theta) * b;
        out.bounds.c_q = std::max((1.0 + theta) * a, (1.0 + theta) * b);
        out.bounds.exact = true;
    } else if (auto it = q_registry().find(pert_name); it != q_registry().end()) {
        auto pert = it->second(params_of(qspec["perturbation"]), n);
        out.model.q_field = [base, pert](const Vec& x, Mat& q) {
            pert(x, q);
            q += base;
        };
        // black-box rates: envelopes estimated by sampling, not certified
        out.bounds = sample_q_bounds(out.model, -12.0, 12.0, 401, 200, 0);
        out.bounds.exact = false;
    } else {
        throw ConfigError("unknown q perturbation family '" + pert_name + "'");
    }

    // reference distribution over states
    if (cfg.contains("pi")) {
        const auto pv = cfg["pi"].get<std::vector<double>>();
        if (static_cast<int>(pv.size()) != n) throw ConfigError("pi must have n_states entries");
        out.ref.pi = Eigen::Map<const Vec>(pv.data(), n);
        const double s = out.ref.pi.sum();
        if (out.ref.pi.minCoeff() <= 0.0 || std::abs(s - 1.0) > 1e-8)
            throw ConfigError("pi must be a strictly positive probability vector");
        out.ref.pi /= s;
    } else {
        out.ref.pi = invariant_pi(base);
    }
    out.ref.potential = out.model.potential;

    if (out.gamma_preset.size() == 0) {
        out.gamma_preset = Vec::Constant(n, 2.0);
        out.beta_preset = Vec::Zero(n);
    }
    return out;
}

json example_config(double a, double b, double theta, double delta) {
    if (a <= 0.0 || b <= 0.0) throw ConfigError("example: a,b > 0 required");
    if (theta < 0.0 || theta >= 1.0) throw ConfigError("example: theta in [0,1) required");
    json cfg;
    cfg["dim"] = 1;
    cfg["n_states"] = 2;
    cfg["family"] = {{"name", "constant_sigma"}, {"params", {{"value", 1.0}}}};
    cfg["v"] = {{"family", "gaussian"}, {"params", {{"curvature", 1.0}}}};
    cfg["z"] = json::array({json{{"family", "zero"}},
                            json{{"family", "affine"}, {"params", {{"slope", delta}, {"offset", 0.0}}}}});
    cfg["q"] = {{"base", {{-a, a}, {b, -b}}},
                {"perturbation", {{"family", "example_trig"}, {"params", {{"theta", theta}}}}}};
    return cfg;
}

BuiltinModel example_model(double a, double b, double theta, double delta) {
    return model_from_json(example_config(a, b, theta, delta));
}

}  // namespace rsdiff
