#include "martingap/cli.hpp"

#include "martingap/bitseq.hpp"
#include "martingap/config.hpp"
#include "martingap/cotplan.hpp"
#include "martingap/debias.hpp"
#include "martingap/gapstats.hpp"
#include "martingap/manifest.hpp"
#include "martingap/mdl.hpp"
#include "martingap/predictors.hpp"
#include "martingap/remote.hpp"
#include "martingap/rng.hpp"
#include "martingap/svg.hpp"
#include "martingap/textutil.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace martingap {
namespace {

struct CommandContext {
    KvConfig cfg;
    std::string out_dir;
    std::map<std::string, std::string> input_digests;

    std::string out_path(const std::string& name) const {
        return (std::filesystem::path(out_dir) / name).string();
    }

    void write_manifest(const std::string& command,
                        std::uint64_t seed) const {
        Manifest m;
        m.command = command;
        m.config = cfg.values();
        m.input_digests = input_digests;
        m.seed = seed;
        write_text_file(out_path("manifest.json"), manifest_json(m));
    }
};

using Handler = std::function<void(CommandContext&)>;

struct CommandSpec {
    std::string name;
    std::string help;
    // Key -> default; doubles as the set of recognized keys.
    std::vector<std::pair<std::string, std::string>> defaults;
    Handler handler;
};

const std::vector<std::pair<std::string, std::string>> kPredictorKeys = {
    {"predictor", "beta"},      // beta | surrogate | laplace | mle | remote
    {"alpha0", "1"},
    {"beta0", "1"},
    {"lf", "1"},
    {"sigma2-pe", "1"},
    {"period", "64"},
    {"floor", "1e-6"},
    {"endpoint", ""},
    {"model", ""},
    {"api-path", "/v1/logprobs"},
    {"cache-dir", ".martingap_cache"},
    {"credential-env", "MARTINGAP_API_KEY"},
    {"max-concurrency", "10"},
    {"max-retries", "3"},
};

std::unique_ptr<Predictor> build_predictor(const KvConfig& cfg) {
    std::string kind = cfg.get_string("predictor", "beta");
    if (kind == "remote") {
        RemoteClientConfig rc;
        rc.endpoint = cfg.get_string("endpoint", "");
        rc.model = cfg.get_string("model", "");
        rc.path = cfg.get_string("api-path", rc.path);
        rc.cache_dir = cfg.get_string("cache-dir", rc.cache_dir);
        rc.credential_env =
            cfg.get_string("credential-env", rc.credential_env);
        rc.max_concurrency =
            static_cast<int>(cfg.get_long("max-concurrency", 10));
        rc.max_retries = static_cast<int>(cfg.get_long("max-retries", 3));
        return std::make_unique<RemotePredictor>(rc);
    }
    PredictorConfig pc;
    pc.kind = kind;
    pc.alpha0 = cfg.get_double("alpha0", 1.0);
    pc.beta0 = cfg.get_double("beta0", 1.0);
    pc.lf = cfg.get_double("lf", 1.0);
    pc.sigma2_pe = cfg.get_double("sigma2-pe", 1.0);
    pc.period = cfg.get_double("period", 64.0);
    pc.floor = cfg.get_double("floor", kProbFloor);
    try {
        return make_predictor(pc);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::vector<double> model_curve(const ScalingFitResult& fit,
                                const std::vector<double>& xs) {
    std::vector<double> ys;
    ys.reserve(xs.size());
    for (double n : xs) {
        double u = fit.form == ScalingForm::lognn ? std::log2(n) / n : 1.0 / n;
        ys.push_back(fit.a * u + fit.b);
    }
    return ys;
}

std::vector<double> dense_grid(double lo, double hi, std::size_t count) {
    std::vector<double> xs;
    xs.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        xs.push_back(lo + (hi - lo) * static_cast<double>(i) /
                              static_cast<double>(count - 1));
    return xs;
}

// Scatter of the series plus both fitted forms, shared by gap-scan / fit.
void write_gap_figure(const CommandContext& ctx, const std::string& name,
                      const GapSeries& series) {
    SvgPlot plot;
    plot.title = "mean martingale gap vs length (" + series.predictor + ", " +
                 series.mode + ")";
    plot.x_label = "sequence length n";
    plot.y_label = "mean gap (bits)";

    SvgSeries points;
    points.label = "measured";
    for (const auto& rec : series.records) {
        points.x.push_back(static_cast<double>(rec.length));
        points.y.push_back(rec.mean_gap);
    }
    plot.series.push_back(points);

    std::string csv = gap_series_csv(series);
    if (!series.records.empty()) {
        double lo = static_cast<double>(series.records.front().length);
        double hi = static_cast<double>(series.records.back().length);
        auto xs = dense_grid(lo, hi, 100);
        for (ScalingForm form : {ScalingForm::lognn, ScalingForm::invn}) {
            try {
                ScalingFitResult fit = fit_scaling(series, form);
                SvgSeries curve;
                curve.label = scaling_form_name(form) + " fit";
                curve.line = true;
                curve.markers = false;
                curve.x = xs;
                curve.y = model_curve(fit, xs);
                plot.series.push_back(curve);
                csv += "# fit " + scaling_form_name(form) + ": a=" +
                       format_g17(fit.a) + " b=" + format_g17(fit.b) + "\n";
            } catch (const std::exception&) {
                // Degenerate series (too few records): points only.
            }
        }
    }
    plot.data_csv = csv;
    write_text_file(ctx.out_path(name), render_svg(plot));
}

GapSeries load_series(CommandContext& ctx) {
    std::string path = ctx.cfg.get_string("series", "");
    if (path.empty())
        throw ConfigError("missing required config key 'series'");
    GapSeries series;
    try {
        series = gap_series_from_csv(read_text_file(path));
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("cannot parse series file " + path + ": " +
                          e.what());
    }
    ctx.input_digests[path] = file_digest_hex(path);
    return series;
}

void cmd_gap_scan(CommandContext& ctx) {
    auto pred = build_predictor(ctx.cfg);
    GapScanConfig sc;
    sc.lengths = ctx.cfg.get_sizes("lengths", "10:100:10");
    sc.per_length =
        static_cast<std::size_t>(ctx.cfg.get_long("per-length", 100));
    sc.mode = ctx.cfg.get_string("mode", "permutation");
    sc.perm_trials =
        static_cast<std::size_t>(ctx.cfg.get_long("perm-trials", 8));
    sc.seed = ctx.cfg.get_uint64("seed", 20240801);
    sc.threads = static_cast<unsigned>(ctx.cfg.get_long("threads", 0));

    GapSeries series = gap_scan(*pred, sc);
    write_text_file(ctx.out_path("gaps.csv"), gap_series_csv(series));
    write_gap_figure(ctx, "figure_gaps.svg", series);
    ctx.write_manifest("gap-scan", sc.seed);
}

void cmd_fit(CommandContext& ctx) {
    GapSeries series = load_series(ctx);
    std::uint64_t seed = ctx.cfg.get_uint64("seed", 0);

    ScalingFitResult lognn = fit_scaling(series, ScalingForm::lognn);
    ScalingFitResult invn = fit_scaling(series, ScalingForm::invn);
    ModelComparison cmp = compare_models(lognn, invn);

    write_text_file(ctx.out_path("fit_lognn.json"), scaling_fit_json(lognn));
    write_text_file(ctx.out_path("fit_invn.json"), scaling_fit_json(invn));
    write_text_file(ctx.out_path("comparison.json"), comparison_json(cmp));

    long resamples = ctx.cfg.get_long("bootstrap", 0);
    if (resamples > 0) {
        double level = ctx.cfg.get_double("level", 0.95);
        ScalingForm form = cmp.preferred;
        nlohmann::json j;
        j["form"] = scaling_form_name(cmp.preferred);
        j["level"] = level;
        j["resamples"] = resamples;
        for (FitParam param : {FitParam::a, FitParam::b}) {
            BootstrapCi ci = bootstrap_ci(
                series, form, param, static_cast<std::size_t>(resamples),
                level, seed);
            const char* name = param == FitParam::a ? "a" : "b";
            j[name] = {{"lo", ci.lo},
                       {"hi", ci.hi},
                       {"replicates", ci.replicates},
                       {"discarded", ci.discarded}};
        }
        write_text_file(ctx.out_path("bootstrap.json"), j.dump(2) + "\n");
    }

    write_gap_figure(ctx, "figure_fit.svg", series);
    ctx.write_manifest("fit", seed);
}

void cmd_debias(CommandContext& ctx) {
    GapSeries series = load_series(ctx);
    double period = ctx.cfg.get_double("period", 64.0);
    std::string trend = ctx.cfg.get_string("trend", "lognn");
    double bandwidth = ctx.cfg.get_double("bandwidth", 0.0);
    std::uint64_t seed = ctx.cfg.get_uint64("seed", 0);

    DebiasResult result =
        debias(series, period, scaling_form_from_name(trend), bandwidth);

    write_text_file(ctx.out_path("debias_model.json"),
                    harmonic_model_json(result.model));
    write_text_file(ctx.out_path("debias_metrics.json"),
                    debias_metrics_json(result));
    write_text_file(ctx.out_path("debiased.csv"),
                    gap_series_csv(result.debiased));

    // Spectral peaks before/after, plus both series in the data table.
    SvgPlot plot;
    plot.title = "harmonic peaks before/after debias (period " +
                 format_g17(period) + ")";
    plot.x_label = "period (positions)";
    plot.y_label = "power fraction";
    std::string csv = "# before\n" + gap_series_csv(series) + "# after\n" +
                      gap_series_csv(result.debiased);
    ScalingForm form = scaling_form_from_name(trend);
    const GapSeries* sides[2] = {&series, &result.debiased};
    const char* labels[2] = {"before", "after"};
    for (int side = 0; side < 2; ++side) {
        SvgSeries pts;
        pts.label = labels[side];
        try {
            SpectralPeaks peaks = detect_harmonics(*sides[side], period, form);
            for (const auto& pk : peaks.peaks) {
                pts.x.push_back(pk.period);
                pts.y.push_back(pk.power_fraction);
                csv += std::string("# peak ") + labels[side] + ": period=" +
                       format_g17(pk.period) + " power_fraction=" +
                       format_g17(pk.power_fraction) + "\n";
            }
        } catch (const std::exception&) {
            // Too few records for spectral analysis: empty layer.
        }
        plot.series.push_back(pts);
    }
    plot.data_csv = csv;
    write_text_file(ctx.out_path("figure_spectrum.svg"), render_svg(plot));
    ctx.write_manifest("debias", seed);
}

void cmd_permavg(CommandContext& ctx) {
    auto pred = build_predictor(ctx.cfg);
    VarianceCurveConfig vc;
    vc.length = static_cast<std::size_t>(ctx.cfg.get_long("length", 64));
    vc.ks = ctx.cfg.get_sizes("ks", "1,2,5,10,20,50");
    vc.trials = static_cast<std::size_t>(ctx.cfg.get_long("trials", 64));
    vc.n_boot = static_cast<std::size_t>(ctx.cfg.get_long("boot", 1000));
    vc.seed = ctx.cfg.get_uint64("seed", 20240801);
    vc.threads = static_cast<unsigned>(ctx.cfg.get_long("threads", 0));

    PermAvgCurve curve = variance_curve(*pred, vc);

    nlohmann::json j;
    j["predictor"] = pred->name();
    j["length"] = vc.length;
    j["trials"] = curve.trials;
    j["seed"] = vc.seed;
    j["exchangeable"] = curve.exchangeable;
    if (curve.exchangeable) {
        // Zero spread at some k: no exponent exists.
        j["exponent"] = nullptr;
        j["ci_lo"] = nullptr;
        j["ci_hi"] = nullptr;
    } else {
        j["exponent"] = curve.exponent;
        j["ci_lo"] = curve.ci_lo;
        j["ci_hi"] = curve.ci_hi;
    }
    j["points"] = nlohmann::json::array();
    std::string csv = "# predictor=" + pred->name() + "\n# seed=" +
                      std::to_string(vc.seed) + "\nk,std\n";
    for (const auto& pt : curve.points) {
        j["points"].push_back({{"k", pt.k}, {"std", pt.std_dev}});
        csv += std::to_string(pt.k) + "," + format_g17(pt.std_dev) + "\n";
    }
    write_text_file(ctx.out_path("permavg.json"), j.dump(2) + "\n");

    SvgPlot plot;
    plot.title = "spread of permutation-averaged forecast vs k";
    plot.x_label = "permutations averaged k";
    plot.y_label = "std of averaged forecast";
    plot.log_x = true;
    plot.log_y = true;
    SvgSeries pts;
    pts.label = "measured";
    for (const auto& pt : curve.points) {
        pts.x.push_back(static_cast<double>(pt.k));
        pts.y.push_back(pt.std_dev);
    }
    plot.series.push_back(pts);
    if (!curve.exchangeable && !curve.points.empty() &&
        curve.points.front().std_dev > 0.0) {
        // Power-law guide through the first point with the fitted slope.
        SvgSeries guide;
        guide.label = "slope " + format_g17(curve.exponent);
        guide.line = true;
        guide.markers = false;
        double k0 = static_cast<double>(curve.points.front().k);
        double s0 = curve.points.front().std_dev;
        for (const auto& pt : curve.points) {
            double k = static_cast<double>(pt.k);
            guide.x.push_back(k);
            guide.y.push_back(s0 * std::pow(k / k0, curve.exponent));
        }
        plot.series.push_back(guide);
    }
    plot.data_csv = csv;
    write_text_file(ctx.out_path("figure_variance.svg"), render_svg(plot));
    ctx.write_manifest("permavg", vc.seed);
}

void cmd_mdl(CommandContext& ctx) {
    auto pred = build_predictor(ctx.cfg);
    double p = ctx.cfg.get_double("p", 0.5);
    auto lengths = ctx.cfg.get_sizes("lengths", "20,100,200");
    auto trials = static_cast<std::size_t>(ctx.cfg.get_long("trials", 100));
    std::uint64_t seed = ctx.cfg.get_uint64("seed", 20240801);
    auto threads = static_cast<unsigned>(ctx.cfg.get_long("threads", 0));

    EfficiencyCurve curve =
        efficiency_curve(*pred, p, lengths, trials, seed, threads);
    write_text_file(ctx.out_path("efficiency.csv"),
                    efficiency_curve_csv(curve));
    ctx.write_manifest("mdl", seed);
}

std::vector<BenefitPoint> load_benefit_points(CommandContext& ctx,
                                              const std::string& path) {
    std::string text = read_text_file(path);
    ctx.input_digests[path] = file_digest_hex(path);
    std::vector<BenefitPoint> points;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t == "k,value") continue;  // optional header
        auto parts = split(t, ',');
        if (parts.size() != 2)
            throw ConfigError("points file " + path + " line " +
                              std::to_string(lineno) + ": expected k,value");
        try {
            points.push_back(
                {std::stod(trim(parts[0])), std::stod(trim(parts[1]))});
        } catch (const std::exception&) {
            throw ConfigError("points file " + path + " line " +
                              std::to_string(lineno) + ": bad number");
        }
    }
    return points;
}

std::vector<double> load_stream(CommandContext& ctx,
                                const std::string& path) {
    std::string text = read_text_file(path);
    ctx.input_digests[path] = file_digest_hex(path);
    std::vector<double> stream;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        try {
            stream.push_back(std::stod(t));
        } catch (const std::exception&) {
            throw ConfigError("stream file " + path + ": bad number '" + t +
                              "'");
        }
    }
    return stream;
}

void cmd_cot(CommandContext& ctx) {
    CotParams params;
    params.n = ctx.cfg.get_double("n", 100.0);
    params.eps = ctx.cfg.get_double("eps", 0.1);
    params.delta = ctx.cfg.get_double("delta", 0.06);
    params.h_cot = ctx.cfg.get_double("h-cot", 3.0);
    params.alpha = ctx.cfg.get_double("alpha", 5.0);
    params.k0 = ctx.cfg.get_double("k0", 10.0);
    params.b0 = ctx.cfg.get_double("b0", 6.0);
    params.b_opt = ctx.cfg.get_double("b-opt", 0.0);
    params.beta = ctx.cfg.get_double("beta", 0.5);
    params.v_max = ctx.cfg.get_double("v-max", 2.0);
    params.rho = ctx.cfg.get_double("rho", 0.5);
    params.m_b = ctx.cfg.get_double("m-b", 0.0);
    params.rope_period = ctx.cfg.get_long("rope-period", 64);
    params.sample_budget = ctx.cfg.get_double("budget", 1e5);
    std::uint64_t seed = ctx.cfg.get_uint64("seed", 20240801);

    std::vector<BenefitPoint> points;
    std::string points_path = ctx.cfg.get_string("points", "");
    if (!points_path.empty()) {
        points = load_benefit_points(ctx, points_path);
    } else {
        std::size_t j =
            static_cast<std::size_t>(ctx.cfg.get_long("points-count", 0));
        if (j == 0)
            j = benefit_point_count(params.n,
                                    ctx.cfg.get_bool("points-base2", false));
        BenefitFit truth;
        truth.alpha = params.alpha;
        truth.k0 = params.k0;
        truth.b0 = params.b0;
        truth.b_opt = params.b_opt;
        double noise = ctx.cfg.get_double("noise", 0.0);
        points = synthetic_benefit_points(truth, benefit_grid(params.n, j),
                                          noise, derive_seed(seed, 3));
    }

    CotPlan result;
    std::string stream_path = ctx.cfg.get_string("stream", "");
    if (!stream_path.empty()) {
        result = plan_with_stream(load_stream(ctx, stream_path), points,
                                  params);
    } else {
        result = plan(params, points);
    }

    write_text_file(ctx.out_path("plan.json"), cot_plan_json(result));
    std::string points_csv = "k,value\n";
    for (const auto& pt : points)
        points_csv += format_g17(pt.k) + "," + format_g17(pt.value) + "\n";
    write_text_file(ctx.out_path("points.csv"), points_csv);
    std::cout << cot_plan_summary(result) << "\n";
    ctx.write_manifest("cot", seed);
}

std::vector<CommandSpec> command_table() {
    std::vector<CommandSpec> cmds;

    CommandSpec gap_scan;
    gap_scan.name = "gap-scan";
    gap_scan.help = "measure martingale gaps across sequence lengths";
    gap_scan.defaults = kPredictorKeys;
    gap_scan.defaults.insert(gap_scan.defaults.end(),
                             {{"lengths", "10:100:10"},
                              {"per-length", "100"},
                              {"mode", "permutation"},
                              {"perm-trials", "8"},
                              {"seed", "20240801"},
                              {"threads", "0"}});
    gap_scan.handler = cmd_gap_scan;
    cmds.push_back(std::move(gap_scan));

    CommandSpec fit;
    fit.name = "fit";
    fit.help = "fit scaling forms to a gap series and compare them";
    fit.defaults = {{"series", ""},
                    {"bootstrap", "0"},
                    {"level", "0.95"},
                    {"seed", "0"}};
    fit.handler = cmd_fit;
    cmds.push_back(std::move(fit));

    CommandSpec debias_cmd;
    debias_cmd.name = "debias";
    debias_cmd.help = "remove periodic positional structure from a series";
    debias_cmd.defaults = {{"series", ""},
                           {"period", "64"},
                           {"trend", "lognn"},
                           {"bandwidth", "0"},
                           {"seed", "0"}};
    debias_cmd.handler = cmd_debias;
    cmds.push_back(std::move(debias_cmd));

    CommandSpec permavg;
    permavg.name = "permavg";
    permavg.help = "variance of permutation-averaged forecasts vs k";
    permavg.defaults = kPredictorKeys;
    permavg.defaults.insert(permavg.defaults.end(),
                            {{"length", "64"},
                             {"ks", "1,2,5,10,20,50"},
                             {"trials", "64"},
                             {"boot", "1000"},
                             {"seed", "20240801"},
                             {"threads", "0"}});
    permavg.handler = cmd_permavg;
    cmds.push_back(std::move(permavg));

    CommandSpec mdl;
    mdl.name = "mdl";
    mdl.help = "codelength efficiency across sequence lengths";
    mdl.defaults = kPredictorKeys;
    mdl.defaults.insert(mdl.defaults.end(), {{"p", "0.5"},
                                             {"lengths", "20,100,200"},
                                             {"trials", "100"},
                                             {"seed", "20240801"},
                                             {"threads", "0"}});
    mdl.handler = cmd_mdl;
    cmds.push_back(std::move(mdl));

    CommandSpec cot;
    cot.name = "cot";
    cot.help = "plan a chain-of-thought length with guarantees";
    cot.defaults = {{"n", "100"},         {"eps", "0.1"},
                    {"delta", "0.06"},    {"h-cot", "3"},
                    {"alpha", "5"},       {"k0", "10"},
                    {"b0", "6"},          {"b-opt", "0"},
                    {"beta", "0.5"},      {"v-max", "2"},
                    {"rho", "0.5"},       {"m-b", "0"},
                    {"rope-period", "64"}, {"budget", "100000"},
                    {"points", ""},       {"points-count", "0"},
                    {"points-base2", "false"}, {"noise", "0"},
                    {"stream", ""},       {"seed", "20240801"}};
    cot.handler = cmd_cot;
    cmds.push_back(std::move(cot));

    return cmds;
}

KvConfig resolve_config(const CommandSpec& spec,
                        const std::string& config_path,
                        const std::map<std::string, std::string>& flags) {
    KvConfig resolved;
    for (const auto& [key, def] : spec.defaults) resolved.set(key, def);
    if (!config_path.empty()) {
        KvConfig file = KvConfig::parse_file(config_path);
        for (const auto& [key, value] : file.values()) {
            if (!resolved.has(key))
                throw ConfigError("config key '" + key +
                                  "' is not recognized by " + spec.name);
            resolved.set(key, value);
        }
    }
    for (const auto& [key, value] : flags) resolved.set(key, value);
    return resolved;
}

void run_command(const CommandSpec& spec, KvConfig resolved,
                 const std::string& out_dir) {
    CommandContext ctx;
    ctx.cfg = std::move(resolved);
    ctx.out_dir = out_dir.empty() ? "out" : out_dir;
    std::error_code ec;
    std::filesystem::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + ctx.out_dir);
    spec.handler(ctx);
}

bool nested_remote_error(const std::exception& e) {
    if (dynamic_cast<const RemoteError*>(&e) != nullptr) return true;
    try {
        std::rethrow_if_nested(e);
    } catch (const std::exception& inner) {
        return nested_remote_error(inner);
    } catch (...) {
    }
    return false;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"martingale gap measurement and chain-length planning"};
    app.require_subcommand(0, 1);

    std::string from_manifest;
    std::string top_out_dir;
    app.add_option("--from-manifest", from_manifest,
                   "re-run the command recorded in a manifest file");
    app.add_option("--out-dir", top_out_dir,
                   "output directory for --from-manifest runs");

    auto cmds = std::make_shared<std::vector<CommandSpec>>(command_table());
    struct SubState {
        std::string config_path;
        std::string out_dir = "out";
        std::map<std::string, std::string> flags;
    };
    std::vector<std::shared_ptr<SubState>> states;
    std::string selected;

    for (const auto& spec : *cmds) {
        auto* sub = app.add_subcommand(spec.name, spec.help);
        auto state = std::make_shared<SubState>();
        states.push_back(state);
        sub->add_option("--config", state->config_path,
                        "key=value config file");
        sub->add_option("--out-dir", state->out_dir, "output directory");
        for (const auto& [key, def] : spec.defaults) {
            std::string k = key;
            sub->add_option_function<std::string>(
                "--" + key,
                [state, k](const std::string& v) { state->flags[k] = v; },
                "override config key " + key + " (default: " +
                    (def.empty() ? "unset" : def) + ")");
        }
        const std::string name = spec.name;
        sub->callback([&selected, name]() { selected = name; });
    }

    try {
        app.parse(argc, argv);

        if (!selected.empty()) {
            for (std::size_t i = 0; i < cmds->size(); ++i) {
                if ((*cmds)[i].name != selected) continue;
                const auto& state = states[i];
                KvConfig resolved = resolve_config(
                    (*cmds)[i], state->config_path, state->flags);
                run_command((*cmds)[i], std::move(resolved), state->out_dir);
                return kExitOk;
            }
        }

        if (!from_manifest.empty()) {
            Manifest m = manifest_from_json(read_text_file(from_manifest));
            for (const auto& spec : *cmds) {
                if (spec.name != m.command) continue;
                KvConfig resolved;
                for (const auto& [key, value] : m.config)
                    resolved.set(key, value);
                run_command(spec, std::move(resolved),
                            top_out_dir.empty() ? "out" : top_out_dir);
                return kExitOk;
            }
            throw ConfigError("manifest names unknown command '" +
                              m.command + "'");
        }

        std::cout << app.help() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        int code = const_cast<CLI::App&>(app).exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const RemoteError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        if (nested_remote_error(e)) {
            std::cerr << "backend error: " << e.what() << "\n";
            return kExitBackend;
        }
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace martingap
