#include "deqmpi/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "deqmpi/errors.hpp"

namespace deqmpi {

using nlohmann::json;

void ScannerConfig::validate() const {
    if (grid_h < 2 || grid_w < 2) throw config_error("scanner.grid: both dims must be >= 2");
    if (n_angles < 2) throw config_error("scanner.n_angles: must be >= 2");
    if (harmonic_lo < 1 || harmonic_hi < harmonic_lo)
        throw config_error("scanner.harmonics: range empty or below 1");
    if (bins_per_harmonic < 1) throw config_error("scanner.bins_per_harmonic: must be >= 1");
    if (gradient_tpm <= 0.0) throw config_error("scanner.gradient_tpm: degenerate zero gradient");
    if (drive_mt <= 0.0) throw config_error("scanner.drive_mt: must be > 0");
    if (voxel_mm <= 0.0) throw config_error("scanner.voxel_mm: must be > 0");
    if (particle_nm <= 0.0) throw config_error("scanner.particle_nm: must be > 0");
    if (samples_per_period < 4 * static_cast<std::size_t>(harmonic_hi) * bins_per_harmonic)
        throw config_error("scanner.samples_per_period: too few samples for requested harmonics");
    if (row_scale <= 0.0) throw config_error("scanner.row_scale: must be > 0");
    if (row_snr_threshold < 0.0) throw config_error("scanner.row_snr_threshold: must be >= 0");
}

void DatasetSplits::validate() const {
    // Disjoint seed ranges keep train/val/test phantoms independent.
    const std::uint64_t t0 = train_seed, t1 = train_seed + n_train;
    const std::uint64_t v0 = val_seed, v1 = val_seed + n_val;
    const std::uint64_t s0 = test_seed, s1 = test_seed + n_test;
    auto overlap = [](std::uint64_t a0, std::uint64_t a1, std::uint64_t b0, std::uint64_t b1) {
        return a0 < b1 && b0 < a1;
    };
    if (overlap(t0, t1, v0, v1) || overlap(t0, t1, s0, s1) || overlap(v0, v1, s0, s1))
        throw config_error("phantom.dataset: train/val/test seed ranges overlap");
}

void PhantomConfig::validate() const {
    if (grid_h < 2 || grid_w < 2) throw config_error("phantom.grid: both dims must be >= 2");
    if (vessel.max_branches < 1 || vessel.max_branches > 8)
        throw config_error("phantom.vessel.max_branches: must be in [1,8]");
    if (vessel.width_px_lo < 0.5 || vessel.width_px_hi < vessel.width_px_lo)
        throw config_error("phantom.vessel.width_px: invalid range");
    if (vessel.blur_sigma < 0.0) throw config_error("phantom.vessel.blur_sigma: must be >= 0");
    if (torus.tube_diameter_mm <= 0.0) throw config_error("phantom.torus.tube_diameter_mm: must be > 0");
    if (torus.inner_diameter_mm <= 0.0) throw config_error("phantom.torus.inner_diameter_mm: must be > 0");
    if (torus.voxel_mm <= 0.0) throw config_error("phantom.torus.voxel_mm: must be > 0");
    dataset.validate();
}

void SolverConfig::validate() const {
    if (mu <= 0.0) throw config_error("solver.mu: must be > 0");
    if (alpha1 < 0.0 || alpha1 > 1.0) throw config_error("solver.alpha1: must be in [0,1]");
    if (epsilon < 0.0) throw config_error("solver.epsilon: must be >= 0");
    if (n_iters < 1) throw config_error("solver.n_iters: must be >= 1");
    if (tv_inner_iters < 1) throw config_error("solver.tv_inner_iters: must be >= 1");
    if (art_lambda < 0.0) throw config_error("solver.art_lambda: must be >= 0");
    if (art_iters < 1) throw config_error("solver.art_iters: must be >= 1");
}

void AndersonConfig::validate() const {
    if (m < 1) throw config_error("anderson.m: must be >= 1");
    if (tol <= 0.0) throw config_error("anderson.tol: must be > 0");
    if (ridge < 0.0) throw config_error("anderson.ridge: must be >= 0");
    if (beta <= 0.0 || beta > 1.0) throw config_error("anderson.beta: must be in (0,1]");
    if (max_iters < 1) throw config_error("anderson.max_iters: must be >= 1");
}

void RdnConfig::validate() const {
    if (n_res < 1 || f_r < 1 || n_conv < 1 || f_s < 1 || kernel < 1)
        throw config_error("rdn: all sizes must be >= 1");
    if (kernel % 2 == 0) throw config_error("rdn.kernel: must be odd");
}

void LcConfig::validate() const {
    if (n_lc < 1 || f_lc < 1) throw config_error("lc: sizes must be >= 1");
    if (kernel % 2 == 0) throw config_error("lc.kernel: must be odd");
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw config_error("training.lr: must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw config_error("training.betas: must be in [0,1)");
    if (batch < 1) throw config_error("training.batch: must be >= 1");
    if (sigma1 < 0.0 || sigma2 < 0.0 || sigma3 < 0.0)
        throw config_error("training.sigmas: must be >= 0");
    if (eps < 0.0) throw config_error("training.eps: must be >= 0");
    if (discrepancy_factor < 1) throw config_error("training.discrepancy_factor: must be >= 1");
    if (unroll_iters < 1) throw config_error("training.unroll_iters: must be >= 1");
    anderson.validate();
    rdn.validate();
    lc.validate();
}

void ExperimentConfig::validate() const {
    scanner.validate();
    phantom.validate();
    solver.validate();
    training.validate();
}

double alpha1_for_snr(double snr_db) {
    if (snr_db < 20.0) return 0.1;
    if (snr_db < 30.0) return 0.8;
    return 0.9;
}

double art_lambda_for_snr(double snr_db) {
    if (snr_db < 15.0) return 10.0;
    if (snr_db < 35.0) return 1.0;
    return 0.1;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
    ExperimentConfig cfg;
    if (name == "paper-l1") {
        cfg.solver.reg = Regularizer::l1;
        cfg.solver.mu = 250.0;
        cfg.solver.n_iters = 200;
    } else if (name == "paper-tv") {
        cfg.solver.reg = Regularizer::tv;
        cfg.solver.mu = 50.0;
        cfg.solver.n_iters = 100;
    } else if (name == "paper-hyb") {
        cfg.solver.reg = Regularizer::hybrid;
        cfg.solver.mu = 10.0;
        cfg.solver.n_iters = 100;
    } else if (name == "paper-art") {
        cfg.solver.art_lambda = 1.0;
        cfg.solver.art_iters = 10;
    } else if (name == "paper-deq") {
        cfg.training.lr = 1e-3;
        cfg.training.anderson.max_iters = 25;
        cfg.training.anderson.tol = 1e-4;
        cfg.training.sigma1 = 0.1;
        cfg.training.sigma2 = 0.05;
        cfg.training.sigma3 = 0.02;
    } else {
        throw config_error("unknown preset '" + name + "'");
    }
    return cfg;
}

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw config_error("unknown key '" + where + it.key() + "'");
    }
}

double num(const json& obj, const std::string& where, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw config_error("key '" + where + key + "' must be a number");
    return obj[key].get<double>();
}

std::size_t unum(const json& obj, const std::string& where, const std::string& key,
                 std::size_t fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer() || obj[key].get<long long>() < 0)
        throw config_error("key '" + where + key + "' must be a nonnegative integer");
    return obj[key].get<std::size_t>();
}

bool flag(const json& obj, const std::string& where, const std::string& key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) throw config_error("key '" + where + key + "' must be a boolean");
    return obj[key].get<bool>();
}

void parse_grid(const json& obj, const std::string& where, std::size_t& h, std::size_t& w) {
    if (!obj.contains("grid")) return;
    const json& g = obj["grid"];
    if (!g.is_array() || g.size() != 2)
        throw config_error("key '" + where + "grid' must be a [h, w] pair");
    h = g[0].get<std::size_t>();
    w = g[1].get<std::size_t>();
}

void parse_scanner(const json& j, ScannerConfig& s) {
    check_keys(j, "scanner.",
               {"grid", "voxel_mm", "n_angles", "harmonic_lo", "harmonic_hi", "bins_per_harmonic",
                "drive_mt", "gradient_tpm", "particle_nm", "samples_per_period",
                "row_snr_threshold", "row_scale"});
    parse_grid(j, "scanner.", s.grid_h, s.grid_w);
    s.voxel_mm = num(j, "scanner.", "voxel_mm", s.voxel_mm);
    s.n_angles = unum(j, "scanner.", "n_angles", s.n_angles);
    s.harmonic_lo = static_cast<int>(num(j, "scanner.", "harmonic_lo", s.harmonic_lo));
    s.harmonic_hi = static_cast<int>(num(j, "scanner.", "harmonic_hi", s.harmonic_hi));
    s.bins_per_harmonic = unum(j, "scanner.", "bins_per_harmonic", s.bins_per_harmonic);
    s.drive_mt = num(j, "scanner.", "drive_mt", s.drive_mt);
    s.gradient_tpm = num(j, "scanner.", "gradient_tpm", s.gradient_tpm);
    s.particle_nm = num(j, "scanner.", "particle_nm", s.particle_nm);
    s.samples_per_period = unum(j, "scanner.", "samples_per_period", s.samples_per_period);
    s.row_snr_threshold = num(j, "scanner.", "row_snr_threshold", s.row_snr_threshold);
    s.row_scale = num(j, "scanner.", "row_scale", s.row_scale);
}

void parse_phantom(const json& j, PhantomConfig& p) {
    check_keys(j, "phantom.", {"kind", "grid", "seed", "vessel", "torus", "dataset"});
    if (j.contains("kind")) {
        const std::string k = j["kind"].get<std::string>();
        if (k == "vessel")
            p.kind = PhantomKind::vessel;
        else if (k == "torus")
            p.kind = PhantomKind::torus;
        else
            throw config_error("phantom.kind: must be 'vessel' or 'torus'");
    }
    parse_grid(j, "phantom.", p.grid_h, p.grid_w);
    p.seed = static_cast<std::uint64_t>(unum(j, "phantom.", "seed", p.seed));
    if (j.contains("vessel")) {
        const json& v = j["vessel"];
        check_keys(v, "phantom.vessel.", {"max_branches", "width_px", "blur_sigma"});
        p.vessel.max_branches = static_cast<int>(unum(v, "phantom.vessel.", "max_branches",
                                                      p.vessel.max_branches));
        if (v.contains("width_px")) {
            const json& w = v["width_px"];
            if (!w.is_array() || w.size() != 2)
                throw config_error("phantom.vessel.width_px: must be a [lo, hi] pair");
            p.vessel.width_px_lo = w[0].get<double>();
            p.vessel.width_px_hi = w[1].get<double>();
        }
        p.vessel.blur_sigma = num(v, "phantom.vessel.", "blur_sigma", p.vessel.blur_sigma);
    }
    if (j.contains("torus")) {
        const json& t = j["torus"];
        check_keys(t, "phantom.torus.",
                   {"tube_diameter_mm", "inner_diameter_mm", "voxel_mm", "center_offset_mm"});
        p.torus.tube_diameter_mm = num(t, "phantom.torus.", "tube_diameter_mm",
                                       p.torus.tube_diameter_mm);
        p.torus.inner_diameter_mm = num(t, "phantom.torus.", "inner_diameter_mm",
                                        p.torus.inner_diameter_mm);
        p.torus.voxel_mm = num(t, "phantom.torus.", "voxel_mm", p.torus.voxel_mm);
        if (t.contains("center_offset_mm")) {
            const json& o = t["center_offset_mm"];
            if (!o.is_array() || o.size() != 2)
                throw config_error("phantom.torus.center_offset_mm: must be a [y, x] pair");
            p.torus.center_offset_y_mm = o[0].get<double>();
            p.torus.center_offset_x_mm = o[1].get<double>();
        }
    }
    if (j.contains("dataset")) {
        const json& d = j["dataset"];
        check_keys(d, "phantom.dataset.",
                   {"n_train", "n_val", "n_test", "train_seed", "val_seed", "test_seed"});
        p.dataset.n_train = unum(d, "phantom.dataset.", "n_train", p.dataset.n_train);
        p.dataset.n_val = unum(d, "phantom.dataset.", "n_val", p.dataset.n_val);
        p.dataset.n_test = unum(d, "phantom.dataset.", "n_test", p.dataset.n_test);
        p.dataset.train_seed = unum(d, "phantom.dataset.", "train_seed", p.dataset.train_seed);
        p.dataset.val_seed = unum(d, "phantom.dataset.", "val_seed", p.dataset.val_seed);
        p.dataset.test_seed = unum(d, "phantom.dataset.", "test_seed", p.dataset.test_seed);
    }
}

void parse_solver(const json& j, SolverConfig& s) {
    check_keys(j, "solver.",
               {"regularizer", "mu", "alpha1", "epsilon", "n_iters", "tv_inner_iters", "nonneg",
                "art_lambda", "art_iters", "auto_band"});
    if (j.contains("regularizer")) {
        const std::string r = j["regularizer"].get<std::string>();
        if (r == "l1")
            s.reg = Regularizer::l1;
        else if (r == "tv")
            s.reg = Regularizer::tv;
        else if (r == "hybrid")
            s.reg = Regularizer::hybrid;
        else
            throw config_error("solver.regularizer: must be 'l1', 'tv' or 'hybrid'");
    }
    s.mu = num(j, "solver.", "mu", s.mu);
    s.alpha1 = num(j, "solver.", "alpha1", s.alpha1);
    s.epsilon = num(j, "solver.", "epsilon", s.epsilon);
    s.n_iters = unum(j, "solver.", "n_iters", s.n_iters);
    s.tv_inner_iters = unum(j, "solver.", "tv_inner_iters", s.tv_inner_iters);
    s.nonneg = flag(j, "solver.", "nonneg", s.nonneg);
    s.art_lambda = num(j, "solver.", "art_lambda", s.art_lambda);
    s.art_iters = unum(j, "solver.", "art_iters", s.art_iters);
    s.auto_band = flag(j, "solver.", "auto_band", s.auto_band);
}

void parse_training(const json& j, TrainConfig& t) {
    check_keys(j, "training.",
               {"lr", "beta1", "beta2", "epochs", "batch", "snr_db", "eps", "sigma1", "sigma2",
                "sigma3", "seed", "threads", "discrepancy_factor", "unroll_iters",
                "pretrain_epochs", "anderson", "rdn", "lc"});
    t.lr = num(j, "training.", "lr", t.lr);
    t.beta1 = num(j, "training.", "beta1", t.beta1);
    t.beta2 = num(j, "training.", "beta2", t.beta2);
    t.epochs = unum(j, "training.", "epochs", t.epochs);
    t.batch = unum(j, "training.", "batch", t.batch);
    t.snr_db = num(j, "training.", "snr_db", t.snr_db);
    t.eps = num(j, "training.", "eps", t.eps);
    t.sigma1 = num(j, "training.", "sigma1", t.sigma1);
    t.sigma2 = num(j, "training.", "sigma2", t.sigma2);
    t.sigma3 = num(j, "training.", "sigma3", t.sigma3);
    t.seed = unum(j, "training.", "seed", t.seed);
    t.threads = unum(j, "training.", "threads", t.threads);
    t.discrepancy_factor = unum(j, "training.", "discrepancy_factor", t.discrepancy_factor);
    t.unroll_iters = unum(j, "training.", "unroll_iters", t.unroll_iters);
    t.pretrain_epochs = unum(j, "training.", "pretrain_epochs", t.pretrain_epochs);
    if (j.contains("anderson")) {
        const json& a = j["anderson"];
        check_keys(a, "training.anderson.", {"m", "beta", "ridge", "max_iters", "tol"});
        t.anderson.m = unum(a, "training.anderson.", "m", t.anderson.m);
        t.anderson.beta = num(a, "training.anderson.", "beta", t.anderson.beta);
        t.anderson.ridge = num(a, "training.anderson.", "ridge", t.anderson.ridge);
        t.anderson.max_iters = unum(a, "training.anderson.", "max_iters", t.anderson.max_iters);
        t.anderson.tol = num(a, "training.anderson.", "tol", t.anderson.tol);
    }
    if (j.contains("rdn")) {
        const json& r = j["rdn"];
        check_keys(r, "training.rdn.", {"n_res", "f_r", "n_conv", "f_s", "kernel"});
        t.rdn.n_res = unum(r, "training.rdn.", "n_res", t.rdn.n_res);
        t.rdn.f_r = unum(r, "training.rdn.", "f_r", t.rdn.f_r);
        t.rdn.n_conv = unum(r, "training.rdn.", "n_conv", t.rdn.n_conv);
        t.rdn.f_s = unum(r, "training.rdn.", "f_s", t.rdn.f_s);
        t.rdn.kernel = unum(r, "training.rdn.", "kernel", t.rdn.kernel);
    }
    if (j.contains("lc")) {
        const json& l = j["lc"];
        check_keys(l, "training.lc.", {"n_lc", "f_lc", "kernel"});
        t.lc.n_lc = unum(l, "training.lc.", "n_lc", t.lc.n_lc);
        t.lc.f_lc = unum(l, "training.lc.", "f_lc", t.lc.f_lc);
        t.lc.kernel = unum(l, "training.lc.", "kernel", t.lc.kernel);
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw config_error("config: top level must be an object");
    check_keys(j, "", {"preset", "scanner", "phantom", "solver", "training"});

    ExperimentConfig cfg;
    if (j.contains("preset")) cfg = ExperimentConfig::preset(j["preset"].get<std::string>());
    if (j.contains("scanner")) parse_scanner(j["scanner"], cfg.scanner);
    if (j.contains("phantom")) parse_phantom(j["phantom"], cfg.phantom);
    if (j.contains("solver")) parse_solver(j["solver"], cfg.solver);
    if (j.contains("training")) parse_training(j["training"], cfg.training);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

ReconMethod parse_method(const std::string& name) {
    if (name == "l1") return ReconMethod::l1;
    if (name == "tv") return ReconMethod::tv;
    if (name == "hyb") return ReconMethod::hyb;
    if (name == "art") return ReconMethod::art;
    if (name == "deq") return ReconMethod::deq;
    if (name == "deq-noLc") return ReconMethod::deq_no_lc;
    if (name == "unrolled") return ReconMethod::unrolled;
    if (name == "e2e") return ReconMethod::e2e;
    throw config_error("unknown method '" + name + "'");
}

std::string method_name(ReconMethod m) {
    switch (m) {
    case ReconMethod::l1: return "l1";
    case ReconMethod::tv: return "tv";
    case ReconMethod::hyb: return "hyb";
    case ReconMethod::art: return "art";
    case ReconMethod::deq: return "deq";
    case ReconMethod::deq_no_lc: return "deq-noLc";
    case ReconMethod::unrolled: return "unrolled";
    case ReconMethod::e2e: return "e2e";
    }
    return "?";
}

} // namespace deqmpi
