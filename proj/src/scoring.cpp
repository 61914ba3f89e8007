#include "rtlevo/scoring.hpp"

#include "rtlevo/error.hpp"

#include <cmath>

namespace rtlevo {

namespace {

constexpr std::pair<ScoreMode, const char*> kModes[] = {
    {ScoreMode::correctness_only, "correctness_only"},
    {ScoreMode::ppa, "ppa"},
    {ScoreMode::timing, "timing"},
    {ScoreMode::downstream, "downstream"},
    {ScoreMode::eda, "eda"},
};

const char* const kTerms[] = {kTermArea, kTermWire, kTermTiming, kTermDownstream};

std::map<Outcome, double> default_penalties()
{
    return {
        {Outcome::mismatch, 10.0},
        {Outcome::compile_error, 50.0},
        {Outcome::syntax_error, 50.0},
        {Outcome::timeout, 40.0},
        {Outcome::unknown_failure, 60.0},
        {Outcome::tool_unavailable, 60.0},
    };
}

std::map<std::string, double> metrics_of_passed(const std::vector<EvaluatorResult>& results)
{
    std::map<std::string, double> merged;
    for (auto& r : results)
        if (r.passed)
            for (auto& [k, v] : r.metrics)
                merged.emplace(k, v);
    return merged;
}

const EvaluatorResult* find(const std::vector<EvaluatorResult>& results, std::string_view name)
{
    for (auto& r : results)
        if (r.evaluator == name)
            return &r;
    return nullptr;
}

std::optional<double> metric(const EvaluatorResult* r, const std::string& key)
{
    if (!r)
        return std::nullopt;
    auto it = r->metrics.find(key);
    if (it == r->metrics.end())
        return std::nullopt;
    return it->second;
}

bool sec_holds(const std::vector<EvaluatorResult>& results)
{
    auto v = metric(find(results, "eda"), "sec_pass");
    return v && *v == 1.0;
}

double sum_breakdown(const std::map<std::string, double>& b)
{
    double s = 0.0;
    for (auto& [_, v] : b)
        s += v;
    return s;
}

} // namespace

std::string to_string(ScoreMode m)
{
    for (auto& [v, n] : kModes)
        if (v == m)
            return n;
    throw Error("unnamed score mode");
}

ScoreMode score_mode_from_string(std::string_view s)
{
    for (auto& [v, n] : kModes)
        if (s == n)
            return v;
    throw ConfigError("unknown score mode '" + std::string(s) + "'");
}

double ScoreConfig::mismatch_coefficient() const
{
    auto it = penalty_table.find(Outcome::mismatch);
    return it == penalty_table.end() ? 0.0 : it->second;
}

double ScoreConfig::lambda_for(const std::string& term) const
{
    if (term == kTermArea)
        return lambda_area;
    if (term == kTermWire)
        return lambda_wire;
    if (term == kTermTiming)
        return lambda_timing;
    if (term == kTermDownstream)
        return lambda_downstream;
    return 0.0;
}

ScoreConfig preset(ScoreMode mode)
{
    ScoreConfig c;
    c.mode = mode;
    c.penalty_table = default_penalties();
    c.optional_fail_penalty = 5.0;
    c.required = {"functional"};
    c.normalizers = {
        {"cell_count", 100.0},
        {"wire_bits", 500.0},
        {"abc_delay_proxy", 10.0},
        {"downstream_score", 5.0},
    };
    c.metric_keys = {
        {kTermArea, {"cell_count"}},
        {kTermWire, {"wire_bits"}},
        {kTermTiming, {"abc_delay_proxy"}},
        {kTermDownstream, {"downstream_score"}},
    };
    switch (mode) {
    case ScoreMode::correctness_only:
        break;
    case ScoreMode::ppa:
        c.lambda_area = 1.0;
        c.lambda_wire = 1.0;
        break;
    case ScoreMode::timing:
        c.lambda_area = 1.0;
        c.lambda_wire = 1.0;
        c.lambda_timing = 1.0;
        break;
    case ScoreMode::downstream:
        c.lambda_area = 1.0;
        c.lambda_wire = 1.0;
        c.lambda_timing = 1.0;
        c.lambda_downstream = 1.0;
        break;
    case ScoreMode::eda:
        c.hard_gates = {"sec_pass"};
        break;
    }
    return c;
}

void validate_score_config(const ScoreConfig& c)
{
    for (double l : {c.lambda_area, c.lambda_wire, c.lambda_timing, c.lambda_downstream})
        if (!std::isfinite(l) || l < 0.0)
            throw ConfigError("score weights must be finite and >= 0");
    for (Outcome o : {Outcome::mismatch, Outcome::compile_error, Outcome::syntax_error, Outcome::timeout,
                      Outcome::unknown_failure, Outcome::tool_unavailable}) {
        auto it = c.penalty_table.find(o);
        if (it == c.penalty_table.end())
            throw ConfigError("penalty_table lacks outcome " + to_string(o));
        if (!std::isfinite(it->second) || it->second < 0.0)
            throw ConfigError("penalty for " + to_string(o) + " must be finite and >= 0");
    }
    if (!std::isfinite(c.optional_fail_penalty) || c.optional_fail_penalty < 0.0)
        throw ConfigError("optional_fail_penalty must be finite and >= 0");
    if (!c.required.count("functional"))
        throw ConfigError("required evaluators must include functional");
    if (c.mode == ScoreMode::eda && !c.hard_gates.count("sec_pass"))
        throw ConfigError("eda mode requires the sec_pass hard gate");
    for (auto& g : c.hard_gates)
        if (g != "sec_pass")
            throw ConfigError("unknown hard gate '" + g + "'");
    for (auto& [term, keys] : c.metric_keys) {
        bool known = false;
        for (auto* t : kTerms)
            known |= term == t;
        if (!known)
            throw ConfigError("unknown objective term '" + term + "'");
        if (c.lambda_for(term) == 0.0)
            continue;
        for (auto& key : keys) {
            auto it = c.normalizers.find(key);
            if (it == c.normalizers.end() || it->second == 0.0 || !std::isfinite(it->second))
                throw ConfigError("normalizer for '" + key + "' must be present and non-zero");
        }
    }
}

void to_json(json& j, const ScoreConfig& c)
{
    json pen = json::object();
    for (auto& [o, v] : c.penalty_table)
        pen[to_string(o)] = v;
    j = json{{"mode", to_string(c.mode)},
             {"weights",
              {{"area", c.lambda_area},
               {"wire", c.lambda_wire},
               {"timing", c.lambda_timing},
               {"downstream", c.lambda_downstream}}},
             {"penalty_table", pen},
             {"optional_fail_penalty", c.optional_fail_penalty},
             {"required", c.required},
             {"hard_gates", c.hard_gates},
             {"normalizers", c.normalizers},
             {"metric_keys", c.metric_keys},
             {"eda",
              {{"epsilon", c.eda_epsilon},
               {"sec_penalty", c.sec_penalty},
               {"area_cap_penalty", c.area_cap_penalty}}}};
    if (c.area_cap)
        j["eda"]["area_cap"] = *c.area_cap;
}

void from_json(const json& j, ScoreConfig& c)
{
    c = preset(score_mode_from_string(j.at("mode").get<std::string>()));
    if (auto it = j.find("weights"); it != j.end()) {
        c.lambda_area = it->value("area", c.lambda_area);
        c.lambda_wire = it->value("wire", c.lambda_wire);
        c.lambda_timing = it->value("timing", c.lambda_timing);
        c.lambda_downstream = it->value("downstream", c.lambda_downstream);
    }
    if (auto it = j.find("penalty_table"); it != j.end())
        for (auto& [k, v] : it->items())
            c.penalty_table[outcome_from_string(k)] = v.get<double>();
    c.optional_fail_penalty = j.value("optional_fail_penalty", c.optional_fail_penalty);
    if (j.contains("required"))
        c.required = j["required"].get<std::set<std::string>>();
    if (j.contains("hard_gates"))
        c.hard_gates = j["hard_gates"].get<std::set<std::string>>();
    if (j.contains("normalizers"))
        for (auto& [k, v] : j["normalizers"].items())
            c.normalizers[k] = v.get<double>();
    if (j.contains("metric_keys"))
        for (auto& [k, v] : j["metric_keys"].items())
            c.metric_keys[k] = v.get<std::vector<std::string>>();
    if (auto it = j.find("eda"); it != j.end()) {
        c.eda_epsilon = it->value("epsilon", c.eda_epsilon);
        c.sec_penalty = it->value("sec_penalty", c.sec_penalty);
        c.area_cap_penalty = it->value("area_cap_penalty", c.area_cap_penalty);
        if (it->contains("area_cap") && !(*it)["area_cap"].is_null())
            c.area_cap = (*it)["area_cap"].get<double>();
    }
}

json default_score_presets_json()
{
    json j = json::object();
    for (auto& [m, name] : kModes)
        j[name] = preset(m);
    return j;
}

std::map<std::string, ScoreConfig> load_score_presets(const fs::path& path)
{
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw ConfigError("cannot load score presets " + path.string() + ": " + e.what());
    }
    std::map<std::string, ScoreConfig> out;
    for (auto& [name, section] : doc.items()) {
        json s = section;
        if (!s.contains("mode"))
            s["mode"] = name;
        ScoreConfig c;
        try {
            c = s.get<ScoreConfig>();
        } catch (const json::exception& e) {
            throw ConfigError("score preset '" + name + "': " + e.what());
        }
        validate_score_config(c);
        out.emplace(name, std::move(c));
    }
    return out;
}

double max_functional_penalty(const ScoreConfig& c)
{
    double m = 0.0;
    for (auto& [o, v] : c.penalty_table)
        if (o != Outcome::mismatch)
            m = std::max(m, v);
    return m;
}

bool pass_predicate(const std::vector<EvaluatorResult>& results, const ScoreConfig& c)
{
    bool ok = true;
    for (auto& name : c.required) {
        const auto* r = find(results, name);
        if (!r)
            throw ConfigError("required evaluator '" + name + "' missing from record");
        ok = ok && r->passed;
    }
    for (auto& gate : c.hard_gates) {
        if (gate == "sec_pass")
            ok = ok && sec_holds(results);
        else
            throw ConfigError("unknown hard gate '" + gate + "'");
    }
    return ok;
}

ScoreResult score_open(const std::vector<EvaluatorResult>& results, const ScoreConfig& c)
{
    if (c.mode == ScoreMode::eda)
        throw PreconditionError("score_open called in eda mode");

    ScoreResult out;
    double p_func = 0.0;
    if (const auto* f = find(results, "functional"); f && !f->passed) {
        if (f->outcome == Outcome::mismatch) {
            double mm = f->metrics.count("mismatch_count") ? f->metrics.at("mismatch_count") : 0.0;
            double total = f->metrics.count("total_samples") ? f->metrics.at("total_samples") : 0.0;
            double ratio = total > 0.0 ? mm / total : 1.0;
            p_func = c.mismatch_coefficient() * ratio;
        } else {
            auto it = c.penalty_table.find(f->outcome);
            if (it == c.penalty_table.end())
                throw ConfigError("penalty_table lacks outcome " + to_string(f->outcome));
            p_func = it->second;
        }
    }
    out.breakdown["functional"] = p_func;

    int optional_failures = 0;
    for (auto& r : results) {
        if (c.required.count(r.evaluator))
            continue;
        if (!r.passed && r.outcome != Outcome::tool_unavailable)
            ++optional_failures;
    }
    out.breakdown["optional"] = c.optional_fail_penalty * optional_failures;

    auto merged = metrics_of_passed(results);
    for (const char* term : kTerms) {
        double lambda = c.lambda_for(term);
        double value = 0.0;
        if (lambda != 0.0) {
            auto kit = c.metric_keys.find(term);
            if (kit != c.metric_keys.end()) {
                for (auto& key : kit->second) {
                    auto mit = merged.find(key);
                    if (mit == merged.end())
                        continue;
                    auto nit = c.normalizers.find(key);
                    if (nit == c.normalizers.end() || nit->second == 0.0)
                        throw ConfigError("normalizer for '" + key + "' must be present and non-zero");
                    value += mit->second / nit->second;
                }
            }
        }
        out.breakdown[term] = lambda * value;
    }

    out.score = sum_breakdown(out.breakdown);
    out.eligible = pass_predicate(results, c);
    return out;
}

ScoreResult score_eda(const std::vector<EvaluatorResult>& results,
                      const std::vector<EvaluatorResult>* baseline, const ScoreConfig& c)
{
    if (c.mode != ScoreMode::eda)
        throw PreconditionError("score_eda called outside eda mode");

    ScoreResult out;
    const auto* cand = find(results, "eda");
    const auto* base = baseline ? find(*baseline, "eda") : nullptr;

    // Improvement is negative: WNS/TNS improve upward, area downward.
    auto delta = [&](const char* key, bool higher_is_better) {
        auto cv = metric(cand, key);
        auto bv = metric(base, key);
        if (!cv || !bv)
            return 0.0;
        double d = (*cv - *bv) / (std::abs(*bv) + c.eda_epsilon);
        return higher_is_better ? -d : d;
    };
    out.breakdown["wns"] = 0.5 * delta("wns", true);
    out.breakdown["tns"] = 0.35 * delta("tns", true);
    out.breakdown["area"] = 0.15 * delta("area", false);

    double p_area = 0.0;
    if (auto a = metric(cand, "area"); a && c.area_cap && *a > *c.area_cap)
        p_area = c.area_cap_penalty * (*a - *c.area_cap) / std::max(std::abs(*c.area_cap), c.eda_epsilon);
    out.breakdown["area_cap"] = p_area;

    bool sec_ok = sec_holds(results);
    out.breakdown["sec"] = sec_ok ? 0.0 : c.sec_penalty;

    out.score = sum_breakdown(out.breakdown);
    out.eligible = sec_ok && pass_predicate(results, c);
    return out;
}

ScoreResult evaluate_score(const std::vector<EvaluatorResult>& results, const ScoreConfig& c,
                           const std::vector<EvaluatorResult>* baseline)
{
    if (c.mode == ScoreMode::eda)
        return score_eda(results, baseline, c);
    return score_open(results, c);
}

std::optional<std::size_t> select_best(const std::vector<CandidateRecord>& records)
{
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!r.eligible)
            continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = records[*best];
        if (r.score < b.score || (r.score == b.score && r.candidate.version.minor < b.candidate.version.minor))
            best = i;
    }
    return best;
}

} // namespace rtlevo
