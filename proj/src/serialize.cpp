#include "dustat/serialize.hpp"

#include "dustat/error.hpp"

#include <cstdio>
#include <sstream>

namespace dustat {

namespace {

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    return out + "\"";
}

}  // namespace

nlohmann::json to_json(const EstimateResult& r) {
    nlohmann::json diag = {
        {"degenerate", r.diagnostics.degenerate},
        {"negative_iop", r.diagnostics.negative_iop},
        {"se_invalid", r.diagnostics.se_invalid},
        {"tie_fraction", r.diagnostics.tie_fraction},
        {"warnings", r.diagnostics.warnings},
    };
    diag["first_stage_rmse"] = r.diagnostics.first_stage_rmse
                                   ? nlohmann::json(*r.diagnostics.first_stage_rmse)
                                   : nlohmann::json(nullptr);
    return {
        {"schema_version", kSchemaVersion},
        {"estimand", r.estimand},
        {"method", to_string(r.method)},
        {"theta", r.theta},
        {"se", r.se},
        {"ci", {r.ci_low, r.ci_high}},
        {"level", r.level},
        {"sigma_hat", r.sigma},
        {"b_hat", r.b},
        {"n", r.n},
        {"folds", r.folds},
        {"learner", r.learner},
        {"alpha_learner", r.alpha_learner},
        {"diagnostics", diag},
    };
}

EstimateResult estimate_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion) {
            throw ConfigError("unsupported schema_version " + j.at("schema_version").dump());
        }
        EstimateResult r;
        r.estimand = j.at("estimand").get<std::string>();
        r.method = method_from_string(j.at("method").get<std::string>());
        r.theta = j.at("theta").get<double>();
        r.se = j.at("se").get<double>();
        r.ci_low = j.at("ci").at(0).get<double>();
        r.ci_high = j.at("ci").at(1).get<double>();
        r.level = j.at("level").get<double>();
        r.sigma = j.at("sigma_hat").get<double>();
        r.b = j.at("b_hat").get<double>();
        r.n = j.at("n").get<std::size_t>();
        r.folds = j.at("folds").get<int>();
        r.learner = j.at("learner").get<std::string>();
        r.alpha_learner = j.at("alpha_learner").get<std::string>();
        const auto& d = j.at("diagnostics");
        r.diagnostics.degenerate = d.at("degenerate").get<bool>();
        r.diagnostics.negative_iop = d.at("negative_iop").get<bool>();
        r.diagnostics.se_invalid = d.at("se_invalid").get<bool>();
        r.diagnostics.tie_fraction = d.at("tie_fraction").get<double>();
        r.diagnostics.warnings = d.at("warnings").get<std::vector<std::string>>();
        if (!d.at("first_stage_rmse").is_null()) {
            r.diagnostics.first_stage_rmse = d.at("first_stage_rmse").get<double>();
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed estimate document: ") + e.what());
    }
}

std::string estimate_csv_header() {
    return "schema_version,estimand,method,theta,se,ci_low,ci_high,level,n,folds,learner,"
           "alpha_learner,degenerate,negative_iop,se_invalid,first_stage_rmse,tie_fraction";
}

std::string estimate_csv_row(const EstimateResult& r) {
    std::ostringstream out;
    out << kSchemaVersion << ',' << r.estimand << ',' << to_string(r.method) << ','
        << number(r.theta) << ',' << number(r.se) << ',' << number(r.ci_low) << ','
        << number(r.ci_high) << ',' << number(r.level) << ',' << r.n << ',' << r.folds << ','
        << quoted(r.learner) << ',' << quoted(r.alpha_learner) << ','
        << (r.diagnostics.degenerate ? 1 : 0) << ',' << (r.diagnostics.negative_iop ? 1 : 0) << ','
        << (r.diagnostics.se_invalid ? 1 : 0) << ','
        << (r.diagnostics.first_stage_rmse ? number(*r.diagnostics.first_stage_rmse) : "") << ','
        << number(r.diagnostics.tie_fraction);
    return out.str();
}

nlohmann::json model_summary(const FittedModel& model) {
    nlohmann::json j = {
        {"kind", to_string(model.kind())},
        {"description", model.description()},
        {"transform", model.transform() == OutcomeTransform::log_exp ? "log_exp" : "none"},
        {"input_columns", model.input_cols()},
    };
    if (const auto* lin = model.linear()) {
        j["lambda"] = lin->lambda;
        j["intercept"] = lin->intercept;
        j["coefficients"] = std::vector<double>(lin->beta.data(), lin->beta.data() + lin->beta.size());
        j["feature_names"] = lin->layout.names();
        j["nonzero"] = (lin->beta.array() != 0.0).count();
    }
    if (const auto* forest = model.forest()) {
        j["n_trees"] = forest->trees.size();
        j["mtry"] = forest->mtry;
        j["leaves"] = forest->leaf_count();
    }
    if (model.kind() == LearnerKind::fixed) {
        j["value"] = model.fixed_value();
    }
    if (model.cv()) {
        j["cv"] = {{"grid", model.cv()->grid}, {"rmse", model.cv()->rmse}, {"chosen", model.cv()->chosen}};
    }
    return j;
}

}  // namespace dustat
