#include "cli.hpp"

#include "dustat/crossfit.hpp"
#include "dustat/data.hpp"
#include "dustat/error.hpp"
#include "dustat/estimators.hpp"
#include "dustat/parallel.hpp"
#include "dustat/rng.hpp"
#include "dustat/serialize.hpp"
#include "dustat/simulate.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace dustat::cli {

LearnerSpec parse_learner(const std::string& text) {
    if (text == "ridge") {
        return LearnerSpec::ridge_cv();
    }
    if (text == "lasso") {
        return LearnerSpec::lasso_cv();
    }
    if (text == "lasso-theory") {
        return LearnerSpec::lasso_theory();
    }
    if (text == "rf" || text == "random_forest") {
        return LearnerSpec::random_forest();
    }
    if (text.rfind("fixed:", 0) == 0) {
        try {
            std::size_t used = 0;
            const std::string value = text.substr(6);
            const double v = std::stod(value, &used);
            if (used == value.size()) {
                return LearnerSpec::fixed(v);
            }
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("--learner: unknown learner '" + text +
                      "' (expected ridge, lasso, lasso-theory, rf or fixed:<value>)");
}

namespace {

struct LearnerFlags {
    std::string name = "lasso";
    std::optional<double> lambda;
    int cv_folds = 10;
    int trees = 500;
    int mtry = 0;
    int min_node = 5;
    bool no_bootstrap = false;
    std::optional<int> interactions;
    bool log_outcome = false;

    void attach(CLI::App* app) {
        app->add_option("--learner", name,
                        "First-step learner: ridge, lasso, lasso-theory, rf or fixed:<value>")
            ->capture_default_str();
        app->add_option("--lambda", lambda, "Fixed ridge/lasso penalty (default: cross-validate)");
        app->add_option("--cv-folds", cv_folds, "Folds for penalty cross-validation")
            ->capture_default_str();
        app->add_option("--trees", trees, "Random forest size")->capture_default_str();
        app->add_option("--mtry", mtry, "Columns tried per split (0: ceil(p/3))")
            ->capture_default_str();
        app->add_option("--min-node", min_node, "Minimum observations per leaf")
            ->capture_default_str();
        app->add_flag("--no-bootstrap", no_bootstrap, "Grow trees on the full sample");
        app->add_option("--interactions", interactions,
                        "Interaction order among categorical columns for ridge/lasso (1-3)");
    }

    LearnerSpec build(std::uint64_t seed, int default_order) const {
        LearnerSpec spec = parse_learner(name);
        if (lambda) {
            spec.penalty.mode = PenaltySpec::Mode::fixed;
            spec.penalty.lambda = *lambda;
        }
        spec.penalty.folds = cv_folds;
        spec.penalty.seed = seed;
        if (spec.kind == LearnerKind::random_forest) {
            spec.forest.n_trees = trees;
            spec.forest.mtry = mtry;
            spec.forest.min_node = min_node;
            spec.forest.bootstrap = !no_bootstrap;
            spec.forest.seed = seed;
        }
        spec.interaction_order = interactions.value_or(default_order);
        if (log_outcome) {
            spec.transform = OutcomeTransform::log_exp;
        }
        return spec;
    }
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void print_result(std::ostream& out, const EstimateResult& r) {
    auto line = [&](const std::string& key, const std::string& value) {
        out << std::left << std::setw(18) << key << value << '\n';
    };
    line("estimand", r.estimand);
    line("method", to_string(r.method));
    line("theta", fmt(r.theta));
    line("se", fmt(r.se));
    line(fmt(100.0 * r.level) + "% CI", "[" + fmt(r.ci_low) + ", " + fmt(r.ci_high) + "]");
    line("n", std::to_string(r.n));
    if (r.folds > 0) {
        line("folds", std::to_string(r.folds));
    }
    line("learner", r.learner);
    if (!r.alpha_learner.empty()) {
        line("alpha learner", r.alpha_learner);
    }
    if (r.diagnostics.first_stage_rmse) {
        line("first-stage RMSE", fmt(*r.diagnostics.first_stage_rmse));
    }
    line("tie fraction", fmt(r.diagnostics.tie_fraction));
    line("degenerate", r.diagnostics.degenerate ? "yes" : "no");
    for (const auto& w : r.diagnostics.warnings) {
        out << "warning: " << w << '\n';
    }
}

std::ofstream open_output(const std::string& path, const std::string& flag) {
    std::ofstream f(path);
    if (!f) {
        throw ConfigError(flag + ": cannot write '" + path + "'");
    }
    return f;
}

struct EstimateFlags {
    std::string target;
    std::string data;
    std::string outcome;
    std::string covariates;
    std::optional<std::string> treatment;
    std::string method = "debiased";
    std::optional<std::string> alpha_learner;
    std::string contrast = "difference";
    int folds = 5;
    std::uint64_t seed = 42;
    double level = 0.95;
    bool categorical_codes = false;
    std::string factors;
    bool crossfit_plugin = false;
    std::string out_json;
    std::string out_csv;
    LearnerFlags learner;
};

int cmd_estimate(const EstimateFlags& f, int threads, std::ostream& out) {
    if (f.target == "ate" && !f.treatment) {
        throw ConfigError("--treatment is required for estimate ate");
    }
    LoadOptions load;
    load.categorical_codes = f.categorical_codes;
    load.factors = split_list(f.factors);
    const Dataset data = load_csv(f.data, f.outcome, f.treatment, split_list(f.covariates), load);
    const LearnerSpec spec = f.learner.build(f.seed, 1);
    EstimateOptions options;
    options.level = f.level;
    options.threads = threads;
    options.crossfit_plugin = f.crossfit_plugin;
    const bool plugin = f.method == "plugin";
    const bool general = f.method == "general";
    std::optional<FoldPartition> folds;
    if (!plugin || f.crossfit_plugin) {
        folds = make_folds(data.n(), f.folds, f.seed);
    }
    std::optional<LearnerSpec> alpha;
    if (f.alpha_learner) {
        LearnerFlags af;
        af.name = *f.alpha_learner;
        alpha = af.build(derive_seed(f.seed, 2), 1);
    }
    EstimateResult r;
    if (f.target == "iop") {
        if (plugin) {
            r = iop_gini_plugin(data, spec, options, folds ? &*folds : nullptr);
        } else if (general) {
            r = iop_gini_debiased_general(data, spec, alpha.value_or(LearnerSpec::lasso_cv()), *folds,
                                          options);
        } else {
            r = iop_gini_debiased_np(data, spec, *folds, options);
        }
    } else if (f.target == "varfv") {
        r = plugin ? varfv_plugin(data, spec, options) : varfv_debiased(data, spec, *folds, options);
    } else if (f.target == "ranking") {
        if (plugin) {
            throw ConfigError("--method: ranking risk has no plug-in estimator");
        }
        r = ranking_risk_debiased(data, spec, *folds, options, general ? &*alpha : nullptr);
    } else {
        if (plugin) {
            throw ConfigError("--method: the treatment contrast has no plug-in estimator");
        }
        const Contrast h = f.contrast == "indicator" ? Contrast::indicator_ge : Contrast::difference;
        r = contrast_te_debiased(data, h, spec, alpha.value_or(LearnerSpec::lasso_cv()), *folds,
                                 options);
    }
    print_result(out, r);
    if (!f.out_json.empty()) {
        auto file = open_output(f.out_json, "--out");
        file << to_json(r).dump(2) << '\n';
    }
    if (!f.out_csv.empty()) {
        auto file = open_output(f.out_csv, "--csv");
        file << estimate_csv_header() << '\n' << estimate_csv_row(r) << '\n';
    }
    return kOk;
}

struct SimulateFlags {
    std::string dgp = "saturated";
    double sigma = 0.1;
    std::size_t n = 1000;
    int reps = 200;
    std::string estimator = "debiased";
    std::string target;
    std::uint64_t seed = 42;
    int folds = 5;
    double level = 0.95;
    double p = 0.3;
    double effect = 1.0;
    bool no_log = false;
    std::string alpha_learner = "lasso";
    std::string out;
    LearnerFlags learner;
};

int cmd_simulate(const SimulateFlags& f, int threads, std::ostream& out) {
    McConfig c;
    c.dgp.kind = dgp_from_string(f.dgp);
    c.dgp.sigma = f.sigma;
    c.dgp.p = f.p;
    c.dgp.effect = f.effect;
    c.n = f.n;
    c.reps = f.reps;
    c.K = f.folds;
    c.level = f.level;
    c.seed = f.seed;
    c.threads = threads;
    std::string target = f.target;
    if (target.empty()) {
        switch (c.dgp.kind) {
            case DgpKind::saturated:
                target = "iop";
                break;
            case DgpKind::linear_gaussian:
            case DgpKind::constant_mean:
                target = "varfv";
                break;
            case DgpKind::constant_label:
                target = "ranking";
                break;
            case DgpKind::randomized_treatment:
                target = "ate";
                break;
        }
    }
    if (f.estimator != "plugin" && f.estimator != "debiased") {
        throw ConfigError("--estimator must be plugin or debiased");
    }
    c.estimator = mc_estimator_from_string(target + "_" + f.estimator);
    const bool saturated = c.dgp.kind == DgpKind::saturated;
    LearnerFlags lf = f.learner;
    lf.log_outcome = saturated && !f.no_log;
    c.learner = lf.build(f.seed, saturated ? 3 : 1);
    LearnerFlags af;
    af.name = f.alpha_learner;
    c.alpha_learner = af.build(derive_seed(f.seed, 2), 1);
    const McReport report = run_mc(c);
    write_mc_table(out, {report});
    if (!f.out.empty()) {
        auto file = open_output(f.out, "--out");
        file << mc_csv_header() << '\n' << mc_csv_row(report) << '\n';
    }
    return kOk;
}

struct FoldsFlags {
    std::size_t n = 0;
    int k = 5;
    std::uint64_t seed = 42;
    bool list = false;
};

int cmd_folds(const FoldsFlags& f, std::ostream& out) {
    const FoldPartition folds = make_folds(f.n, f.k, f.seed);
    const PairBlocks blocks = make_pair_blocks(folds);
    out << "n=" << f.n << " K=" << f.k << " L=" << blocks.size() << " seed=" << f.seed << '\n';
    out << std::right << std::setw(6) << "block" << std::setw(10) << "folds" << std::setw(8)
        << "pairs" << std::setw(10) << "training" << '\n';
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const auto& b = blocks.block_folds(l);
        const std::string label = b.diagonal() ? std::to_string(b.first + 1)
                                               : std::to_string(b.first + 1) + "," +
                                                     std::to_string(b.second + 1);
        std::size_t training = 0;
        for (int a : folds.assignment) {
            training += (a != b.first && a != b.second) ? 1 : 0;
        }
        out << std::setw(6) << l + 1 << std::setw(10) << label << std::setw(8)
            << blocks.pair_count(l) << std::setw(10) << training << '\n';
    }
    if (f.list) {
        out << "assignment:";
        for (int a : folds.assignment) {
            out << ' ' << a + 1;
        }
        out << '\n';
    }
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Debiased U-statistic estimators with machine-learning first steps", "dustat"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: THREADS or all cores)");

    EstimateFlags ef;
    auto* estimate = app.add_subcommand("estimate", "Estimate from a CSV sample");
    estimate->add_option("target", ef.target, "iop, varfv, ranking or ate")
        ->required()
        ->check(CLI::IsMember({"iop", "varfv", "ranking", "ate"}));
    estimate->add_option("--data", ef.data, "Input CSV file")->required();
    estimate->add_option("--outcome", ef.outcome, "Outcome column")->required();
    estimate->add_option("--covariates", ef.covariates,
                         "Comma-separated covariate columns (default: all others)");
    estimate->add_option("--treatment", ef.treatment, "Binary treatment column (ate)");
    estimate->add_option("--method", ef.method, "plugin, debiased or general")
        ->check(CLI::IsMember({"plugin", "debiased", "general"}))
        ->capture_default_str();
    estimate->add_option("--alpha-learner", ef.alpha_learner,
                         "Learner for the correction term (general method, ate)");
    estimate->add_option("--contrast", ef.contrast, "ate contrast: difference or indicator")
        ->check(CLI::IsMember({"difference", "indicator"}))
        ->capture_default_str();
    estimate->add_option("--folds", ef.folds, "Cross-fitting folds K")->capture_default_str();
    estimate->add_option("--seed", ef.seed, "Random seed")->capture_default_str();
    estimate->add_option("--level", ef.level, "Confidence level")->capture_default_str();
    estimate->add_flag("--log-outcome", ef.learner.log_outcome,
                       "Fit learners on ln(y) and exponentiate predictions");
    estimate->add_flag("--categorical-codes", ef.categorical_codes,
                       "Keep categorical columns as integer codes instead of dummies");
    estimate->add_option("--factors", ef.factors,
                         "Comma-separated numeric columns to treat as categorical");
    estimate->add_flag("--crossfit-plugin", ef.crossfit_plugin,
                       "Cross-fit the plug-in estimator (ablation)");
    estimate->add_option("--out", ef.out_json, "Write the result as JSON");
    estimate->add_option("--csv", ef.out_csv, "Write the result as a one-row CSV");
    ef.learner.attach(estimate);

    SimulateFlags sf;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo bias and coverage");
    simulate->add_option("--dgp", sf.dgp, "saturated, linear, constant, treatment or labels")
        ->capture_default_str();
    simulate->add_option("--sigma", sf.sigma, "Noise standard deviation")->capture_default_str();
    simulate->add_option("--n", sf.n, "Sample size")->capture_default_str();
    simulate->add_option("--reps", sf.reps, "Replications")->capture_default_str();
    simulate->add_option("--estimator", sf.estimator, "plugin or debiased")->capture_default_str();
    simulate->add_option("--target", sf.target, "Estimand (default follows the DGP)");
    simulate->add_option("--seed", sf.seed, "Random seed")->capture_default_str();
    simulate->add_option("--folds", sf.folds, "Cross-fitting folds K")->capture_default_str();
    simulate->add_option("--level", sf.level, "Confidence level")->capture_default_str();
    simulate->add_option("--p", sf.p, "Label probability (labels DGP)")->capture_default_str();
    simulate->add_option("--effect", sf.effect, "Treatment effect (treatment DGP)")
        ->capture_default_str();
    simulate->add_flag("--no-log", sf.no_log, "Do not fit the saturated DGP on the log scale");
    simulate->add_option("--alpha-learner", sf.alpha_learner, "Correction learner (ate)")
        ->capture_default_str();
    simulate->add_option("--out", sf.out, "Write the report as CSV");
    sf.learner.attach(simulate);

    FoldsFlags ff;
    auto* folds = app.add_subcommand("folds", "Show the cross-fitting pair blocks");
    folds->add_option("--n", ff.n, "Sample size")->required();
    folds->add_option("--k", ff.k, "Fold count")->capture_default_str();
    folds->add_option("--seed", ff.seed, "Random seed")->capture_default_str();
    folds->add_flag("--list", ff.list, "Print the fold of every observation");

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) {
        args.emplace_back(argv[i]);
    }
    try {
        app.parse(args);
    } catch (const CLI::Success& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "E_CONFIG: " << e.what() << '\n';
        const CLI::App* sub = nullptr;
        for (const auto* s : {estimate, simulate, folds}) {
            if (s->parsed()) {
                sub = s;
            }
        }
        err << (sub != nullptr ? sub->help() : app.help());
        return kConfig;
    }
    try {
        const int workers = resolve_threads(threads);
        if (estimate->parsed()) {
            return cmd_estimate(ef, workers, out);
        }
        if (simulate->parsed()) {
            return cmd_simulate(sf, workers, out);
        }
        return cmd_folds(ff, out);
    } catch (const ConfigError& e) {
        err << "E_CONFIG: " << e.what() << '\n';
        return kConfig;
    } catch (const UsageError& e) {
        err << "E_CONFIG: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        err << "E_DATA: " << e.what() << '\n';
        return kData;
    } catch (const DomainError& e) {
        err << "E_DATA: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        err << "E_NUM: " << e.what() << '\n';
        return kNumerical;
    }
}

}  // namespace dustat::cli
