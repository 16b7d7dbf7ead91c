#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "martingap/bitseq.hpp"
#include "martingap/cotplan.hpp"
#include "martingap/debias.hpp"
#include "martingap/gapstats.hpp"
#include "martingap/mdl.hpp"
#include "martingap/predictors.hpp"
#include "martingap/rng.hpp"

namespace py = pybind11;
using namespace martingap;

namespace {

BitSequence to_seq(const std::vector<uint8_t>& bits) {
    BitSequence x;
    x.bits = bits;
    return x;
}

}  // namespace

PYBIND11_MODULE(martingap, m) {
    m.doc() = "martingale-gap diagnostics and chain-length planning";

    // seqcore ----------------------------------------------------------
    m.def("binary_entropy", &binary_entropy, py::arg("p"));
    m.def("theory_bound", &theory_bound, py::arg("lf"), py::arg("sigma2_pe"),
          py::arg("n"));
    m.def(
        "balanced_sequences",
        [](long n, long count, uint64_t seed) {
            std::vector<std::vector<uint8_t>> out;
            for (auto& s : balanced_sequences(n, count, seed))
                out.push_back(std::move(s.bits));
            return out;
        },
        py::arg("n"), py::arg("count"), py::arg("seed"));
    m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("stream"));

    // predictors --------------------------------------------------------
    py::class_<Predictor, std::shared_ptr<Predictor>>(m, "Predictor")
        .def("predict_one",
             [](const Predictor& p, const std::vector<uint8_t>& prefix) {
                 return p.predict_one(to_seq(prefix));
             },
             py::arg("prefix"))
        .def("name", &Predictor::name);
    m.def(
        "make_predictor",
        [](const std::string& kind, double alpha0, double beta0, double lf,
           double sigma2_pe, double period, double floor) {
            PredictorConfig cfg;
            cfg.kind = kind;
            cfg.alpha0 = alpha0;
            cfg.beta0 = beta0;
            cfg.lf = lf;
            cfg.sigma2_pe = sigma2_pe;
            cfg.period = period;
            cfg.floor = floor;
            return std::shared_ptr<Predictor>(make_predictor(cfg));
        },
        py::arg("kind") = "beta", py::arg("alpha0") = 1.0,
        py::arg("beta0") = 1.0, py::arg("lf") = 1.0,
        py::arg("sigma2_pe") = 1.0, py::arg("period") = 64.0,
        py::arg("floor") = kProbFloor);

    // gap statistics ----------------------------------------------------
    py::class_<GapRecord>(m, "GapRecord")
        .def_readonly("length", &GapRecord::length)
        .def_readonly("mean_gap", &GapRecord::mean_gap)
        .def_readonly("var_gap", &GapRecord::var_gap)
        .def_readonly("count", &GapRecord::count);
    py::class_<GapSeries>(m, "GapSeries")
        .def_readonly("records", &GapSeries::records)
        .def_readonly("predictor", &GapSeries::predictor)
        .def_readonly("mode", &GapSeries::mode)
        .def_readonly("seed", &GapSeries::seed);
    py::enum_<ScalingForm>(m, "ScalingForm")
        .value("lognn", ScalingForm::lognn)
        .value("invn", ScalingForm::invn);
    py::class_<ScalingFitResult>(m, "ScalingFitResult")
        .def_readonly("form", &ScalingFitResult::form)
        .def_readonly("a", &ScalingFitResult::a)
        .def_readonly("b", &ScalingFitResult::b)
        .def_readonly("se_a", &ScalingFitResult::se_a)
        .def_readonly("se_b", &ScalingFitResult::se_b)
        .def_readonly("r2", &ScalingFitResult::r2)
        .def_readonly("adj_r2", &ScalingFitResult::adj_r2)
        .def_readonly("loglik", &ScalingFitResult::loglik);
    py::class_<ModelComparison>(m, "ModelComparison")
        .def_readonly("llr", &ModelComparison::llr)
        .def_readonly("p_value", &ModelComparison::p_value)
        .def_readonly("preferred", &ModelComparison::preferred);
    py::class_<BootstrapCi>(m, "BootstrapCi")
        .def_readonly("lo", &BootstrapCi::lo)
        .def_readonly("hi", &BootstrapCi::hi)
        .def_readonly("replicates", &BootstrapCi::replicates)
        .def_readonly("discarded", &BootstrapCi::discarded);
    py::enum_<FitParam>(m, "FitParam")
        .value("a", FitParam::a)
        .value("b", FitParam::b);
    py::class_<PermAvgPoint>(m, "PermAvgPoint")
        .def_readonly("k", &PermAvgPoint::k)
        .def_readonly("std_dev", &PermAvgPoint::std_dev);
    py::class_<PermAvgCurve>(m, "PermAvgCurve")
        .def_readonly("points", &PermAvgCurve::points)
        .def_readonly("exponent", &PermAvgCurve::exponent)
        .def_readonly("ci_lo", &PermAvgCurve::ci_lo)
        .def_readonly("ci_hi", &PermAvgCurve::ci_hi)
        .def_readonly("exchangeable", &PermAvgCurve::exchangeable);

    m.def(
        "prefix_gap",
        [](const Predictor& p, const std::vector<uint8_t>& x, size_t n) {
            return prefix_gap(p, to_seq(x), n);
        },
        py::arg("predictor"), py::arg("x"), py::arg("n"));
    m.def(
        "permutation_gap",
        [](const Predictor& p, const std::vector<uint8_t>& x, size_t trials,
           uint64_t seed) {
            return permutation_gap(p, to_seq(x), trials, seed);
        },
        py::arg("predictor"), py::arg("x"), py::arg("trials"),
        py::arg("seed"));
    m.def(
        "martingale_residual",
        [](const Predictor& p, const std::vector<uint8_t>& prefix) {
            return martingale_residual(p, to_seq(prefix));
        },
        py::arg("predictor"), py::arg("prefix"));
    m.def(
        "gap_scan",
        [](const Predictor& p, const std::vector<size_t>& lengths,
           size_t per_length, const std::string& mode, size_t perm_trials,
           uint64_t seed, unsigned threads) {
            GapScanConfig cfg;
            cfg.lengths = lengths;
            cfg.per_length = per_length;
            cfg.mode = mode;
            cfg.perm_trials = perm_trials;
            cfg.seed = seed;
            cfg.threads = threads;
            return gap_scan(p, cfg);
        },
        py::arg("predictor"), py::arg("lengths"), py::arg("per_length") = 100,
        py::arg("mode") = "permutation", py::arg("perm_trials") = 8,
        py::arg("seed") = 0, py::arg("threads") = 0);
    m.def("fit_scaling", &fit_scaling, py::arg("series"), py::arg("form"));
    m.def("compare_models", &compare_models, py::arg("first"),
          py::arg("second"));
    m.def("bootstrap_ci", &bootstrap_ci, py::arg("series"), py::arg("form"),
          py::arg("param"), py::arg("resamples"), py::arg("level") = 0.95,
          py::arg("seed") = 0);
    m.def(
        "averaged_predict",
        [](const Predictor& p, const std::vector<uint8_t>& x, size_t k,
           uint64_t seed) { return averaged_predict(p, to_seq(x), k, seed); },
        py::arg("predictor"), py::arg("x"), py::arg("k"), py::arg("seed"));
    m.def(
        "variance_curve",
        [](const Predictor& p, size_t length, const std::vector<size_t>& ks,
           size_t trials, size_t n_boot, uint64_t seed, unsigned threads) {
            VarianceCurveConfig cfg;
            cfg.length = length;
            cfg.ks = ks;
            cfg.trials = trials;
            cfg.n_boot = n_boot;
            cfg.seed = seed;
            cfg.threads = threads;
            return variance_curve(p, cfg);
        },
        py::arg("predictor"), py::arg("length"), py::arg("ks"),
        py::arg("trials") = 64, py::arg("n_boot") = 1000, py::arg("seed") = 0,
        py::arg("threads") = 0);
    m.def("gap_series_csv", &gap_series_csv, py::arg("series"));
    m.def("gap_series_from_csv", &gap_series_from_csv, py::arg("text"));

    // debias -------------------------------------------------------------
    py::class_<SpectralPeak>(m, "SpectralPeak")
        .def_readonly("period", &SpectralPeak::period)
        .def_readonly("power_fraction", &SpectralPeak::power_fraction)
        .def_readonly("amplitude", &SpectralPeak::amplitude)
        .def_readonly("phase", &SpectralPeak::phase);
    py::class_<SpectralPeaks>(m, "SpectralPeaks")
        .def_readonly("peaks", &SpectralPeaks::peaks)
        .def_readonly("median_power", &SpectralPeaks::median_power)
        .def_readonly("total_power", &SpectralPeaks::total_power);
    py::class_<HarmonicTerm>(m, "HarmonicTerm")
        .def_readonly("k", &HarmonicTerm::k)
        .def_readonly("amplitude", &HarmonicTerm::amplitude)
        .def_readonly("phase", &HarmonicTerm::phase);
    py::class_<HarmonicModel>(m, "HarmonicModel")
        .def_readonly("a", &HarmonicModel::a)
        .def_readonly("base_period", &HarmonicModel::base_period)
        .def_readonly("harmonics", &HarmonicModel::harmonics)
        .def_readonly("residual_norm", &HarmonicModel::residual_norm)
        .def_readonly("converged", &HarmonicModel::converged)
        .def("eval", &HarmonicModel::eval, py::arg("n"));
    py::class_<DebiasResult>(m, "DebiasResult")
        .def_readonly("debiased", &DebiasResult::debiased)
        .def_readonly("model", &DebiasResult::model)
        .def_readonly("variance_reduction_pct",
                      &DebiasResult::variance_reduction_pct)
        .def_readonly("band_power_before", &DebiasResult::band_power_before)
        .def_readonly("band_power_after", &DebiasResult::band_power_after);
    m.def("detect_harmonics", &detect_harmonics, py::arg("series"),
          py::arg("base_period"), py::arg("trend_form") = ScalingForm::lognn);
    m.def("fit_harmonic_model", &fit_harmonic_model, py::arg("series"),
          py::arg("base_period"), py::arg("trend_form") = ScalingForm::lognn);
    m.def("residue_smooth", &residue_smooth, py::arg("positions"),
          py::arg("values"), py::arg("h"));
    m.def("debias", &debias, py::arg("series"), py::arg("base_period"),
          py::arg("trend_form") = ScalingForm::lognn,
          py::arg("bandwidth") = 0.0);

    // mdl ----------------------------------------------------------------
    py::class_<MdlLedger>(m, "MdlLedger")
        .def_readonly("per_step", &MdlLedger::per_step)
        .def_readonly("total", &MdlLedger::total)
        .def_readonly("model_cost", &MdlLedger::model_cost)
        .def_readonly("model", &MdlLedger::model);
    py::class_<EfficiencyPoint>(m, "EfficiencyPoint")
        .def_readonly("length", &EfficiencyPoint::length)
        .def_readonly("mean_bits_per_symbol",
                      &EfficiencyPoint::mean_bits_per_symbol)
        .def_readonly("efficiency", &EfficiencyPoint::efficiency)
        .def_readonly("reciprocal", &EfficiencyPoint::reciprocal);
    py::class_<EfficiencyCurve>(m, "EfficiencyCurve")
        .def_readonly("points", &EfficiencyCurve::points)
        .def_readonly("model", &EfficiencyCurve::model)
        .def_readonly("p", &EfficiencyCurve::p)
        .def_readonly("trials", &EfficiencyCurve::trials);
    m.def(
        "codelength",
        [](const Predictor& p, const std::vector<uint8_t>& x) {
            return codelength(p, to_seq(x));
        },
        py::arg("predictor"), py::arg("x"));
    m.def("efficiency_curve", &efficiency_curve, py::arg("predictor"),
          py::arg("p"), py::arg("lengths"), py::arg("trials"),
          py::arg("seed"), py::arg("threads") = 0);
    m.def("hypergeom_entropy_expectation", &hypergeom_entropy_expectation,
          py::arg("n"), py::arg("s"), py::arg("t"));

    // planner --------------------------------------------------------------
    py::class_<CotParams>(m, "CotParams")
        .def(py::init<>())
        .def_readwrite("n", &CotParams::n)
        .def_readwrite("eps", &CotParams::eps)
        .def_readwrite("delta", &CotParams::delta)
        .def_readwrite("h_cot", &CotParams::h_cot)
        .def_readwrite("alpha", &CotParams::alpha)
        .def_readwrite("k0", &CotParams::k0)
        .def_readwrite("b0", &CotParams::b0)
        .def_readwrite("b_opt", &CotParams::b_opt)
        .def_readwrite("beta", &CotParams::beta)
        .def_readwrite("v_max", &CotParams::v_max)
        .def_readwrite("rho", &CotParams::rho)
        .def_readwrite("m_b", &CotParams::m_b)
        .def_readwrite("rope_period", &CotParams::rope_period)
        .def_readwrite("sample_budget", &CotParams::sample_budget);
    py::class_<Admissibility>(m, "Admissibility")
        .def_readonly("eps_ok", &Admissibility::eps_ok)
        .def_readonly("n_ok", &Admissibility::n_ok)
        .def_readonly("eps_min", &Admissibility::eps_min);
    py::class_<EntropyEstimate>(m, "EntropyEstimate")
        .def_readonly("h_cot", &EntropyEstimate::h_cot)
        .def_readonly("half_width", &EntropyEstimate::half_width)
        .def_readonly("m", &EntropyEstimate::m);
    py::class_<SamplePlan>(m, "SamplePlan")
        .def_readonly("m_required", &SamplePlan::m_required)
        .def_readonly("feasible", &SamplePlan::feasible)
        .def_readonly("half_width_at_budget",
                      &SamplePlan::half_width_at_budget);
    py::class_<BenefitPoint>(m, "BenefitPoint")
        .def(py::init([](double k, double value) {
                 return BenefitPoint{k, value};
             }),
             py::arg("k"), py::arg("value"))
        .def_readwrite("k", &BenefitPoint::k)
        .def_readwrite("value", &BenefitPoint::value);
    py::class_<BenefitFit>(m, "BenefitFit")
        .def(py::init<>())
        .def_readwrite("alpha", &BenefitFit::alpha)
        .def_readwrite("k0", &BenefitFit::k0)
        .def_readwrite("b0", &BenefitFit::b0)
        .def_readwrite("b_opt", &BenefitFit::b_opt)
        .def_readonly("residual_norm", &BenefitFit::residual_norm)
        .def_readonly("j", &BenefitFit::j)
        .def_readonly("converged", &BenefitFit::converged)
        .def_readonly("degenerate", &BenefitFit::degenerate);
    py::class_<ClosedForm>(m, "ClosedForm")
        .def_readonly("k_closed", &ClosedForm::k_closed)
        .def_readonly("k_closed_natural", &ClosedForm::k_closed_natural)
        .def_readonly("k_closed_log10", &ClosedForm::k_closed_log10)
        .def_readonly("xi_n", &ClosedForm::xi_n)
        .def_readonly("xi_n_base2", &ClosedForm::xi_n_base2)
        .def_readonly("c2", &ClosedForm::c2);
    py::class_<GridResult>(m, "GridResult")
        .def_readonly("k_grid", &GridResult::k_grid)
        .def_readonly("f_grid", &GridResult::f_grid)
        .def_readonly("boundary", &GridResult::boundary);
    py::class_<CotPlan>(m, "CotPlan")
        .def_readonly("fit", &CotPlan::fit)
        .def_readonly("entropy", &CotPlan::entropy)
        .def_readonly("samples", &CotPlan::samples)
        .def_readonly("closed", &CotPlan::closed)
        .def_readonly("grid", &CotPlan::grid)
        .def_readonly("k_closed_round", &CotPlan::k_closed_round)
        .def_readonly("k_final", &CotPlan::k_final)
        .def_readonly("f_closed", &CotPlan::f_closed)
        .def_readonly("f_final", &CotPlan::f_final)
        .def_readonly("stability_bound", &CotPlan::stability_bound)
        .def_readonly("cost_projection", &CotPlan::cost_projection)
        .def_readonly("budget_warning", &CotPlan::budget_warning)
        .def_readonly("admissible", &CotPlan::admissible);

    m.def("check_admissibility", &check_admissibility, py::arg("params"));
    m.def("estimate_entropy", &estimate_entropy, py::arg("log2_probs"),
          py::arg("delta"), py::arg("v_max"), py::arg("rho"));
    m.def("entropy_half_width", &entropy_half_width, py::arg("delta"),
          py::arg("v_max"), py::arg("rho"), py::arg("m"));
    m.def("required_samples", &required_samples, py::arg("delta"),
          py::arg("v_max"), py::arg("rho"), py::arg("budget") = 1e5);
    m.def("benefit_model", &benefit_model, py::arg("k"), py::arg("fit"));
    m.def("fit_benefit", &fit_benefit, py::arg("points"));
    m.def("positional_penalty", &positional_penalty, py::arg("k"),
          py::arg("n"), py::arg("beta"));
    m.def("total_cost", &total_cost, py::arg("k"), py::arg("params"),
          py::arg("fit"));
    m.def("remainder_envelope", &remainder_envelope, py::arg("k"),
          py::arg("params"));
    m.def("closed_form_kstar", &closed_form_kstar, py::arg("params"));
    m.def("grid_optimize", &grid_optimize, py::arg("params"), py::arg("fit"),
          py::arg("k_max"));
    m.def("rope_adjust", &rope_adjust, py::arg("k"), py::arg("p"));
    m.def("benefit_point_count", &benefit_point_count, py::arg("n"),
          py::arg("base2") = false);
    m.def("benefit_grid", &benefit_grid, py::arg("n"), py::arg("j"));
    m.def("synthetic_benefit_points", &synthetic_benefit_points,
          py::arg("truth"), py::arg("ks"), py::arg("noise_level") = 0.0,
          py::arg("seed") = 0);
    m.def("plan", &plan, py::arg("params"), py::arg("points"));
    m.def("plan_with_stream", &plan_with_stream, py::arg("log2_probs"),
          py::arg("points"), py::arg("params"));
    m.def("cot_plan_json", &cot_plan_json, py::arg("plan"));
    m.def("cot_plan_summary", &cot_plan_summary, py::arg("plan"));
}
