// rsdiff - simulator and verification toolkit for state-dependent
// regime-switching diffusions.
//
// Subcommands: check | simulate | estimate | oracle | compare | reweight |
//              example | pipeline
// Exit codes: 0 = all conditions/tolerances met, 2 = a checked condition
// violated (well-formed run), 1 = operational error.

#include "rsdiff/builtin.hpp"
#include "rsdiff/conditions.hpp"
#include "rsdiff/estimate.hpp"
#include "rsdiff/fp_oracle.hpp"
#include "rsdiff/girsanov.hpp"
#include "rsdiff/manifest.hpp"
#include "rsdiff/simulate.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace rsdiff;

namespace {

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::cerr << "[rsdiff] " << msg << "\n";
}

json load_json(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file);
    json j;
    in >> j;
    return j;
}

BuiltinModel load_model(const std::string& file) { return model_from_json(load_json(file)); }

void dump_json(const fs::path& file, const json& j, RunManifest* manifest = nullptr) {
    write_text_file(file, j.dump(2) + "\n");
    if (manifest) manifest->outputs.push_back(file.filename().string());
}

struct GridSpec {
    double lo = -6.0, hi = 6.0;
    int bins = 150;
};

GridSpec parse_grid(const std::string& spec) {
    GridSpec g;
    const auto c1 = spec.find(':');
    const auto c2 = spec.rfind(':');
    if (c1 == std::string::npos || c2 == c1)
        throw std::runtime_error("grid spec must be lo:hi:bins");
    g.lo = std::stod(spec.substr(0, c1));
    g.hi = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
    g.bins = std::stoi(spec.substr(c2 + 1));
    if (g.bins < 1 || g.hi <= g.lo) throw std::runtime_error("bad grid spec");
    return g;
}

Observable make_observable(const std::string& name) {
    const auto colon = name.find(':');
    const std::string head = name.substr(0, colon);
    const int arg = colon == std::string::npos ? 1 : std::stoi(name.substr(colon + 1));
    if (head == "one") return [](CVecRef, int) { return 1.0; };
    if (head == "mean_x") return [](CVecRef x, int) { return x(0); };
    if (head == "mean_x_sq") return [](CVecRef x, int) { return x.squaredNorm(); };
    if (head == "prob_state") return [arg](CVecRef, int k) { return k == arg ? 1.0 : 0.0; };
    if (head == "pos_and_state")
        return [arg](CVecRef x, int k) { return (k == arg && x(0) > 0.0) ? 1.0 : 0.0; };
    throw std::runtime_error("unknown observable '" + name + "'");
}

ZTarget z_target_from_spec(const json& zspec, const BuiltinModel& bm) {
    // reuse the model-config machinery: swap in the requested z list
    json cfg = bm.config;
    cfg["z"] = zspec;
    return model_from_json(cfg).model.z;
}

void write_ensemble(const fs::path& dir, const std::vector<HybridPath>& paths,
                    const SimConfig& cfg, RunManifest& manifest) {
    json summary;
    summary["n_paths"] = paths.size();
    summary["dt"] = cfg.dt;
    summary["t_end"] = cfg.t_end;
    summary["record_stride"] = cfg.record_stride;
    summary["seed"] = cfg.seed;
    json files = json::array();
    int exploded = 0;
    double mean_x = 0.0, mean_x2 = 0.0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "path_%04zu.csv", i);
        write_text_file(dir / name, path_csv(paths[i]));
        manifest.outputs.push_back(name);
        json meta;
        meta["file"] = name;
        meta["exploded"] = paths[i].exploded_at.has_value();
        if (paths[i].exploded_at) {
            meta["exploded_at"] = *paths[i].exploded_at;
            ++exploded;
        }
        files.push_back(meta);
        mean_x += paths[i].x_final(0);
        mean_x2 += paths[i].x_final.squaredNorm();
        if (cfg.log_jumps) {
            std::snprintf(name, sizeof(name), "jumps_%04zu.csv", i);
            write_text_file(dir / name, jumps_csv(paths[i]));
            manifest.outputs.push_back(name);
        }
    }
    summary["paths"] = files;
    summary["n_exploded"] = exploded;
    summary["mean_x_final"] = mean_x / paths.size();
    summary["mean_x_sq_final"] = mean_x2 / paths.size();
    dump_json(dir / "ensemble_summary.json", summary, &manifest);
}

std::vector<HybridPath> read_ensemble(const fs::path& dir, int dim) {
    const json summary = load_json((dir / "ensemble_summary.json").string());
    std::vector<HybridPath> paths;
    for (const auto& meta : summary.at("paths")) {
        std::ifstream in(dir / meta.at("file").get<std::string>());
        if (!in) throw std::runtime_error("missing path file in " + dir.string());
        std::string line;
        std::getline(in, line);  // header
        HybridPath p;
        p.dim = dim;
        p.record_stride = 1;
        while (std::getline(in, line)) {
            const char* s = line.c_str();
            char* end = nullptr;
            std::strtod(s, &end);  // t column is implied by the row index
            for (int d = 0; d < dim; ++d) {
                s = end + 1;
                p.x.push_back(std::strtod(s, &end));
            }
            s = end + 1;
            p.lambda.push_back(std::atoi(s));
        }
        p.dt = summary.at("dt").get<double>() *
               std::max(1, summary.at("record_stride").get<int>());
        for (long i = 0; i < static_cast<long>(p.lambda.size()); ++i) p.steps.push_back(i);
        p.n_steps = static_cast<long>(p.lambda.size()) - 1;
        if (meta.at("exploded").get<bool>()) p.exploded_at = meta.at("exploded_at").get<double>();
        if (!p.lambda.empty()) {
            p.x_final = Eigen::Map<const Vec>(p.x.data() + (p.lambda.size() - 1) * dim, dim);
            p.lambda_final = p.lambda.back();
            p.t_final = p.n_steps * p.dt;
        }
        paths.push_back(std::move(p));
    }
    return paths;
}

struct EstimateArtifacts {
    DensityEstimate density;
    EmpiricalMeasure measure;
    double entropy = 0.0;
    double entropy_renormalized = 0.0;
    PositivityResult positivity;
    std::vector<double> window_distances;
};

json measure_to_json(const EmpiricalMeasure& em) {
    json j;
    j["grid"] = {{"lo", em.grid.lo(0)}, {"hi", em.grid.hi(0)}, {"bins", em.grid.bins[0]}};
    j["n_states"] = em.n_states;
    j["counts"] = em.counts;
    j["total_time"] = em.total_time;
    j["out_of_box_time"] = em.out_of_box_time;
    j["sample_dt"] = em.sample_dt;
    j["n_exploded_excluded"] = em.n_exploded_excluded;
    return j;
}

EmpiricalMeasure measure_from_json(const json& j) {
    auto grid = HistogramGrid::uniform_1d(j.at("grid").at("lo").get<double>(),
                                          j.at("grid").at("hi").get<double>(),
                                          j.at("grid").at("bins").get<int>());
    EmpiricalMeasure em = EmpiricalMeasure::zero(grid, j.at("n_states").get<int>());
    em.counts = j.at("counts").get<std::vector<double>>();
    em.total_time = j.at("total_time").get<double>();
    em.out_of_box_time = j.at("out_of_box_time").get<double>();
    em.sample_dt = j.at("sample_dt").get<double>();
    em.n_exploded_excluded = j.at("n_exploded_excluded").get<long>();
    return em;
}

void write_estimate_outputs(const fs::path& dir, const EstimateArtifacts& art,
                            RunManifest& manifest) {
    write_text_file(dir / "density.csv", density_csv(art.density));
    manifest.outputs.push_back("density.csv");
    dump_json(dir / "measure.json", measure_to_json(art.measure), &manifest);

    json ent;
    ent["relative_entropy"] = art.entropy;
    ent["relative_entropy_renormalized"] = art.entropy_renormalized;
    ent["in_box_fraction"] = art.density.in_box_fraction;
    ent["n_exploded_excluded"] = art.measure.n_exploded_excluded;
    dump_json(dir / "entropy.json", ent, &manifest);

    json diag;
    const char* verdict = art.positivity.verdict == PositivityVerdict::Positive
                              ? "positive"
                              : art.positivity.verdict == PositivityVerdict::NotPositive
                                    ? "not_positive"
                                    : "insufficient_data";
    diag["positivity"] = {{"verdict", verdict},
                          {"min_rho", art.positivity.min_rho},
                          {"bins_checked", art.positivity.n_bins_checked}};
    diag["window_l1_distances"] = art.window_distances;
    if (art.measure.n_exploded_excluded > 0)
        diag["explosion_note"] =
            "exploded paths excluded; if the conditions hold this is a discretization artifact - "
            "rerun with a smaller dt";
    dump_json(dir / "diagnostics.json", diag, &manifest);
}

json compare_to_json(const CompareResult& cmp) {
    json j;
    j["l1_total"] = cmp.l1_total;
    j["l1_per_state"] = cmp.l1_per_state;
    return j;
}

// In-memory pipeline used by `example` and `pipeline` so that long horizons
// do not round-trip huge CSVs; every stage artifact is still written.
struct PipelineOutcome {
    bool conditions_pass = false;
    json check_report;
    EstimateArtifacts estimate;
    CompareResult compare;
    StationarySolution oracle;
    double entropy_bound_value = std::numeric_limits<double>::quiet_NaN();
};

PipelineOutcome run_pipeline(const fs::path& dir, const BuiltinModel& bm, const SimConfig& cfg,
                             const GridSpec& gs, double burn_in, const Vec& box_lo,
                             const Vec& box_hi, RunManifest& manifest) {
    if (burn_in >= cfg.t_end) throw std::runtime_error("burn-in must be smaller than t-end");
    PipelineOutcome out;

    log_info("stage check");
    out.check_report = condition_report(bm);
    dump_json(dir / "check.json", out.check_report, &manifest);
    out.conditions_pass = out.check_report.at("pass").get<bool>();
    if (out.check_report.contains("entropy_bound"))
        out.entropy_bound_value = out.check_report["entropy_bound"].get<double>();

    log_info("stage simulate (" + std::to_string(cfg.n_paths) + " paths, t_end " +
             std::to_string(cfg.t_end) + ")");
    auto grid = HistogramGrid::uniform_1d(gs.lo, gs.hi, gs.bins);
    const int n_windows = 10;

    std::vector<HybridPath> kept(cfg.n_paths);
    std::vector<EmpiricalMeasure> per_path(cfg.n_paths,
                                           EmpiricalMeasure::zero(grid, bm.model.n_states));
    std::vector<std::vector<EmpiricalMeasure>> windows(cfg.n_paths);

    parallel_for(cfg.n_paths, cfg.threads, [&](long i) {
        OccupationObserver occ(grid, bm.model.n_states, burn_in);
        WindowedOccupationObserver win(grid, bm.model.n_states, burn_in, cfg.t_end, n_windows);
        struct Both : StepObserver {
            StepObserver *a, *b;
            void on_state(double t, const Vec& x, int k, double w) override {
                a->on_state(t, x, k, w);
                b->on_state(t, x, k, w);
            }
        } both;
        both.a = &occ;
        both.b = &win;
        SimConfig pc = cfg;
        const long total_steps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt));
        pc.record_stride = static_cast<int>(std::max(1L, total_steps / 100000));
        kept[i] = simulate_path(bm.model, bm.bounds, Vec::Zero(bm.model.dim), 1, pc,
                                static_cast<std::uint64_t>(i), &both);
        per_path[i] = occ.measure();
        windows[i] = win.windows();
    });

    EmpiricalMeasure em = EmpiricalMeasure::zero(grid, bm.model.n_states);
    for (int i = 0; i < cfg.n_paths; ++i) {
        if (kept[i].exploded_at) {
            ++em.n_exploded_excluded;
            continue;
        }
        em.merge(per_path[i]);
    }
    if (em.total_time <= 0.0) throw AllPathsExploded("pipeline: all paths exploded");
    write_ensemble(dir, kept, cfg, manifest);

    log_info("stage estimate");
    out.estimate.measure = em;
    out.estimate.density = density_vs_reference(em, bm.ref);
    out.estimate.entropy = relative_entropy(out.estimate.density);
    out.estimate.entropy_renormalized = relative_entropy(out.estimate.density, true);
    out.estimate.positivity = positivity_diagnostic(out.estimate.density, box_lo, box_hi);
    for (int i = 0; i < cfg.n_paths; ++i) {
        if (kept[i].exploded_at) continue;
        out.estimate.window_distances = window_l1_distances(windows[i]);
        break;
    }
    write_estimate_outputs(dir, out.estimate, manifest);

    log_info("stage oracle");
    Grid1D og{gs.lo, gs.hi, 2 * gs.bins + 1};
    out.oracle = solve_stationary(bm.model, og);
    write_text_file(dir / "oracle.csv", oracle_csv(out.oracle, bm.ref));
    manifest.outputs.push_back("oracle.csv");

    log_info("stage compare");
    out.compare = compare_mc_vs_oracle(em, out.oracle);
    dump_json(dir / "compare.json", compare_to_json(out.compare), &manifest);
    return out;
}

int finish_manifest(const fs::path& dir, RunManifest& manifest, int exit_code) {
    manifest.finished_at = timestamp_utc();
    write_text_file(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regime-switching diffusion simulator and verification toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 1;
    app.add_option("--seed", seed, "master seed")->capture_default_str();
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (0 = hardware)")->capture_default_str();
    app.add_option("--log-level", g_log_level, "0 quiet, 1 info, 2 debug")->capture_default_str();

    std::string model_file, grid_spec = "-6:6:200", in_dir, observable = "mean_x";
    std::string bound_variant = "log", perturbation, scheme = "thinning";
    double dt = 1e-3, t_end = 10.0, burn_in = 0.0, xmin = -8.0, xmax = 8.0, t_horizon = 1.0;
    int n_paths = 1, stride = 1, oracle_n = 401, refine = 2;
    bool sigma_inv = false, log_jumps = false, unnormalized = false;
    double ex_a = 1.0, ex_b = 1.0, ex_theta = 0.1, ex_delta = 0.5;

    auto* c_check = app.add_subcommand("check", "verify the sufficient conditions");
    c_check->add_option("--model", model_file)->required();
    c_check->add_option("--bound-variant", bound_variant, "log|raw moment term");
    c_check->add_flag("--sigma-inv", sigma_inv, "use |sigma^{-1} Z|^2 in the moment");

    auto* c_sim = app.add_subcommand("simulate", "sample hybrid trajectories");
    c_sim->add_option("--model", model_file)->required();
    c_sim->add_option("--dt", dt)->capture_default_str();
    c_sim->add_option("--t-end", t_end)->capture_default_str();
    c_sim->add_option("--paths", n_paths)->capture_default_str();
    c_sim->add_option("--stride", stride, "record every k-th grid point")->capture_default_str();
    c_sim->add_option("--scheme", scheme, "thinning|bernoulli");
    c_sim->add_flag("--log-jumps", log_jumps, "write jump audit CSVs");

    auto* c_est = app.add_subcommand("estimate", "occupation density vs the reference measure");
    c_est->add_option("--model", model_file)->required();
    c_est->add_option("--in", in_dir, "directory with simulate outputs")->required();
    c_est->add_option("--grid", grid_spec, "lo:hi:bins")->capture_default_str();
    c_est->add_option("--burn-in", burn_in)->capture_default_str();

    auto* c_oracle = app.add_subcommand("oracle", "stationary finite-difference solve");
    c_oracle->add_option("--model", model_file)->required();
    c_oracle->add_option("--xmin", xmin)->capture_default_str();
    c_oracle->add_option("--xmax", xmax)->capture_default_str();
    c_oracle->add_option("--n", oracle_n)->capture_default_str();

    auto* c_cmp = app.add_subcommand("compare", "L1 distance of an estimate vs the oracle");
    c_cmp->add_option("--model", model_file)->required();
    c_cmp->add_option("--in", in_dir, "directory with estimate outputs")->required();
    c_cmp->add_option("--refine", refine, "oracle intervals per bin")->capture_default_str();

    auto* c_rw = app.add_subcommand("reweight", "Girsanov importance sampling");
    c_rw->add_option("--model", model_file)->required();
    c_rw->add_option("--perturbation", perturbation, "Z spec (JSON list, one entry per state)")
        ->required();
    c_rw->add_option("--observable", observable)->capture_default_str();
    c_rw->add_option("--t", t_horizon)->capture_default_str();
    c_rw->add_option("--paths", n_paths)->capture_default_str();
    c_rw->add_option("--dt", dt)->capture_default_str();
    c_rw->add_flag("--unnormalized", unnormalized, "report the unnormalized estimator");

    auto* c_ex = app.add_subcommand("example", "two-state benchmark, end to end");
    c_ex->add_option("--a", ex_a)->capture_default_str();
    c_ex->add_option("--b", ex_b)->capture_default_str();
    c_ex->add_option("--theta", ex_theta)->capture_default_str();
    c_ex->add_option("--delta", ex_delta)->capture_default_str();
    c_ex->add_option("--t-end", t_end, "per-path horizon (default 5000)");
    c_ex->add_option("--dt", dt)->capture_default_str();
    c_ex->add_option("--paths", n_paths, "paths (default 8)");
    c_ex->add_option("--grid", grid_spec)->capture_default_str();
    c_ex->add_option("--burn-in", burn_in, "default 20");

    auto* c_pipe =
        app.add_subcommand("pipeline", "check -> simulate -> estimate -> oracle -> compare");
    c_pipe->add_option("--model", model_file)->required();
    c_pipe->add_option("--dt", dt)->capture_default_str();
    c_pipe->add_option("--t-end", t_end)->capture_default_str();
    c_pipe->add_option("--paths", n_paths)->capture_default_str();
    c_pipe->add_option("--grid", grid_spec)->capture_default_str();
    c_pipe->add_option("--burn-in", burn_in)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    std::string cmdline;
    for (int i = 0; i < argc; ++i) cmdline += std::string(i ? " " : "") + argv[i];

    try {
        const fs::path dir(out_dir);
        fs::create_directories(dir);

        RunManifest manifest;
        manifest.seed = seed;
        manifest.command_line = cmdline;
        manifest.started_at = timestamp_utc();

        if (*c_check) {
            auto bm = load_model(model_file);
            manifest.model_hash = model_hash(bm.config);
            ConditionReportOptions opts;
            opts.bound.log_moment = (bound_variant == "log");
            opts.search.moments.sigma_inverse = sigma_inv;
            const json rep = condition_report(bm, opts);
            dump_json(dir / "check.json", rep, &manifest);
            std::cout << rep.dump(2) << "\n";
            return finish_manifest(dir, manifest, rep.at("pass").get<bool>() ? 0 : 2);
        }

        if (*c_sim) {
            auto bm = load_model(model_file);
            manifest.model_hash = model_hash(bm.config);
            SimConfig cfg;
            cfg.dt = dt;
            cfg.t_end = t_end;
            cfg.n_paths = n_paths;
            cfg.seed = seed;
            cfg.threads = threads;
            cfg.record_stride = stride;
            cfg.log_jumps = log_jumps;
            cfg.scheme =
                scheme == "bernoulli" ? SwitchScheme::BernoulliPerStep : SwitchScheme::Thinning;
            auto paths = simulate_batch(bm.model, bm.bounds, Vec::Zero(bm.model.dim), 1, cfg);
            write_ensemble(dir, paths, cfg, manifest);
            return finish_manifest(dir, manifest, 0);
        }

        if (*c_est) {
            auto bm = load_model(model_file);
            manifest.model_hash = model_hash(bm.config);
            const GridSpec gs = parse_grid(grid_spec);
            auto paths = read_ensemble(in_dir, bm.model.dim);
            auto grid = HistogramGrid::uniform_1d(gs.lo, gs.hi, gs.bins);
            EstimateArtifacts art;
            art.measure = occupation_measure(paths, burn_in, grid, bm.model.n_states);
            art.density = density_vs_reference(art.measure, bm.ref);
            art.entropy = relative_entropy(art.density);
            art.entropy_renormalized = relative_entropy(art.density, true);
            art.positivity =
                positivity_diagnostic(art.density, Vec::Constant(1, -2.0), Vec::Constant(1, 2.0));
            for (const auto& p : paths)
                if (!p.exploded_at && p.n_samples() > 20) {
                    art.window_distances =
                        convergence_diagnostic(p, 10, grid, bm.model.n_states, burn_in);
                    break;
                }
            write_estimate_outputs(dir, art, manifest);
            return finish_manifest(dir, manifest, 0);
        }

        if (*c_oracle) {
            auto bm = load_model(model_file);
            manifest.model_hash = model_hash(bm.config);
            Grid1D g{xmin, xmax, oracle_n};
            auto sol = solve_stationary(bm.model, g);
            write_text_file(dir / "oracle.csv", oracle_csv(sol, bm.ref));
            manifest.outputs.push_back("oracle.csv");
            json info;
            info["residual_norm"] = sol.residual_norm;
            info["sigma_smallest"] = sol.sigma_smallest;
            info["sigma_second"] = sol.sigma_second;
            info["n"] = g.n;
            dump_json(dir / "oracle_info.json", info, &manifest);
            return finish_manifest(dir, manifest, 0);
        }

        if (*c_cmp) {
            auto bm = load_model(model_file);
            manifest.model_hash = model_hash(bm.config);
            const EmpiricalMeasure em =
                measure_from_json(load_json((fs::path(in_dir) / "measure.json").string()));
            Grid1D g{em.grid.lo(0), em.grid.hi(0), refine * em.grid.bins[0] + 1};
            auto sol = solve_stationary(bm.model, g);
            const auto cmp = compare_mc_vs_oracle(em, sol);
            dump_json(dir / "compare.json", compare_to_json(cmp), &manifest);
            std::cout << compare_to_json(cmp).dump(2) << "\n";
            return finish_manifest(dir, manifest, 0);
        }

        if (*c_rw) {
            auto bm = load_model(model_file);
            manifest.model_hash = model_hash(bm.config);
            const json zspec = !perturbation.empty() && (perturbation.front() == '[')
                                   ? json::parse(perturbation)
                                   : load_json(perturbation);
            ZTarget target = z_target_from_spec(zspec, bm);
            const SwitchingModel ref = make_reference(bm.model);
            SimConfig cfg;
            cfg.dt = dt;
            cfg.t_end = t_horizon;
            cfg.n_paths = n_paths;
            cfg.seed = seed;
            cfg.threads = threads;
            cfg.record_stride = 0;
            auto paths = simulate_batch(ref, bm.bounds, Vec::Zero(bm.model.dim), 1, cfg, &target);
            auto est = weighted_expectation(make_observable(observable), paths, !unnormalized);
            json j;
            j["estimate"] = est.estimate;
            j["se"] = est.std_error;
            j["ess"] = est.ess;
            j["mean_weight"] = est.mean_weight;
            j["n_paths"] = est.n_paths;
            dump_json(dir / "reweight.json", j, &manifest);
            std::cout << j.dump(2) << "\n";
            return finish_manifest(dir, manifest, 0);
        }

        if (*c_ex || *c_pipe) {
            BuiltinModel bm;
            if (*c_ex) {
                if (!c_ex->count("--t-end")) t_end = 5000.0;
                if (!c_ex->count("--paths")) n_paths = 8;
                if (!c_ex->count("--burn-in")) burn_in = std::min(20.0, 0.2 * t_end);
                bm = example_model(ex_a, ex_b, ex_theta, ex_delta);
                dump_json(dir / "model.json", bm.config, &manifest);
            } else {
                bm = load_model(model_file);
            }
            manifest.model_hash = model_hash(bm.config);

            SimConfig cfg;
            cfg.dt = dt;
            cfg.t_end = t_end;
            cfg.n_paths = n_paths;
            cfg.seed = seed;
            cfg.threads = threads;
            const GridSpec gs = parse_grid(grid_spec);

            auto outcome = run_pipeline(dir, bm, cfg, gs, burn_in, Vec::Constant(1, -2.0),
                                        Vec::Constant(1, 2.0), manifest);

            json summary;
            summary["model_hash"] = manifest.model_hash;
            summary["conditions_pass"] = outcome.conditions_pass;
            summary["l1_total"] = outcome.compare.l1_total;
            summary["l1_per_state"] = outcome.compare.l1_per_state;
            summary["relative_entropy"] = outcome.estimate.entropy;
            if (std::isfinite(outcome.entropy_bound_value)) {
                summary["entropy_bound"] = outcome.entropy_bound_value;
                summary["entropy_within_bound"] =
                    outcome.estimate.entropy <= outcome.entropy_bound_value;
            }
            summary["positivity"] =
                outcome.estimate.positivity.verdict == PositivityVerdict::Positive;
            summary["n_exploded"] = outcome.estimate.measure.n_exploded_excluded;

            if (*c_ex) {
                // frozen state-2 growth diagnostic (transience indicator)
                json frozen_cfg;
                frozen_cfg["dim"] = 1;
                frozen_cfg["n_states"] = 1;
                frozen_cfg["family"] = bm.config["family"];
                frozen_cfg["v"] = bm.config["v"];
                frozen_cfg["z"] = json::array({bm.config["z"][1]});
                frozen_cfg["q"] = {{"base", {{0.0}}}};
                frozen_cfg["pi"] = {1.0};
                auto frozen = model_from_json(frozen_cfg);
                SimConfig fcfg;
                fcfg.dt = 1e-3;
                fcfg.seed = seed + 1;
                fcfg.n_paths = 64;
                fcfg.threads = threads;
                fcfg.record_stride = 0;
                double sx = 0, sy = 0, sxx = 0, sxy = 0;
                double m_vals[4];
                int gi = 0;
                json growth = json::array();
                for (double t_h : {1.0, 2.0, 4.0, 8.0}) {
                    fcfg.t_end = t_h;
                    auto fp = simulate_batch(frozen.model, frozen.bounds, Vec::Constant(1, 1.0), 1,
                                             fcfg);
                    double m2 = 0.0;
                    for (const auto& p : fp) m2 += p.x_final.squaredNorm();
                    m2 /= fcfg.n_paths;
                    growth.push_back({{"t", t_h}, {"mean_x_sq", m2}});
                    m_vals[gi++] = m2;
                    sx += t_h;
                    sy += m2;
                    sxx += t_h * t_h;
                    sxy += t_h * m2;
                }
                const double slope = (4.0 * sxy - sx * sy) / (4.0 * sxx - sx * sx);
                // a confined state plateaus by T ~ 8, a transient one keeps
                // multiplying; the ratio separates growth from plateau noise
                const double late_ratio = m_vals[3] / std::max(m_vals[2], 1e-300);
                summary["state2_frozen"] = {{"growth", growth},
                                            {"slope", slope},
                                            {"late_growth_ratio", late_ratio},
                                            {"transient", slope > 0.0 && late_ratio > 1.5}};
            }
            dump_json(dir / "summary.json", summary, &manifest);
            std::cout << summary.dump(2) << "\n";
            return finish_manifest(dir, manifest, outcome.conditions_pass ? 0 : 2);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
