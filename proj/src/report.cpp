#include "rtlevo/report.hpp"

#include "rtlevo/evaluators.hpp"
#include "rtlevo/evolver.hpp"

#include <algorithm>
#include <cstdio>

namespace rtlevo {

namespace {

bool downstream_enabled(const fs::path& dir, const History& h)
{
    auto cfg = dir / "config.json";
    if (fs::exists(cfg)) {
        try {
            json j = json::parse(read_file(cfg));
            auto en = j.at("evaluator").value("enabled", std::vector<std::string>{});
            return std::find(en.begin(), en.end(), kDownstream) != en.end();
        } catch (const std::exception&) {
        }
    }
    return std::any_of(h.minors.begin(), h.minors.end(), [](auto& r) { return r.result(kDownstream) != nullptr; });
}

json metric_or_null(const CandidateRecord* rec, const char* evaluator, const char* key)
{
    if (!rec)
        return nullptr;
    const auto* r = rec->result(evaluator);
    if (!r)
        return nullptr;
    auto it = r->metrics.find(key);
    return it == r->metrics.end() ? json(nullptr) : json(it->second);
}

json mean_of(const std::vector<json>& values)
{
    double sum = 0.0;
    int n = 0;
    for (auto& v : values)
        if (v.is_number()) {
            sum += v.get<double>();
            ++n;
        }
    return n ? json(sum / n) : json(nullptr);
}

} // namespace

json build_report(const std::vector<fs::path>& roots, std::vector<std::string>* warnings)
{
    std::vector<fs::path> dirs;
    for (auto& r : roots)
        for (auto& d : discover_task_dirs(r))
            dirs.push_back(d);
    std::sort(dirs.begin(), dirs.end());
    dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());

    json runs = json::array();
    std::vector<json> fs_, pp, cp, pm;
    std::map<std::string, std::vector<json>> ds;
    const char* ds_keys[] = {"cell_count", "mul_cells", "abc_delay_proxy", "adp_proxy", "downstream_score"};
    int ds_runs = 0;

    for (auto& dir : dirs) {
        std::string run_id = dir.parent_path().filename().string();
        std::string label = run_id + "/" + dir.filename().string();
        History h;
        try {
            h = parse_history(dir);
        } catch (const std::exception& e) {
            if (warnings)
                warnings->push_back(label + ": excluded: " + e.what());
            continue;
        }
        if (h.minors.empty()) {
            if (warnings)
                warnings->push_back(label + ": excluded: no parseable minor records");
            continue;
        }
        if (warnings)
            for (auto& d : h.diagnostics)
                warnings->push_back(label + ": " + d.file + ":" + std::to_string(d.line) + ": " + d.message);

        RunSummary s = summarize_run(h.minors.front().task_id, run_id, h);
        json row = s;
        row.erase("final_artifact");
        row["label"] = label;
        fs_.push_back(s.final_success ? 1.0 : 0.0);
        if (s.promotion_pass)
            pp.push_back(*s.promotion_pass);
        cp.push_back(s.compile_pass);
        pm.push_back(static_cast<double>(s.promoted_major_count));

        if (downstream_enabled(dir, h)) {
            const CandidateRecord* base = nullptr;
            for (auto& m : h.majors)
                if (m.promoted && m.baseline_record)
                    base = &*m.baseline_record;
            json d{{"cell_count", metric_or_null(base, kSynthesis, "cell_count")},
                   {"mul_cells", metric_or_null(base, kDownstream, "mul_cells")},
                   {"abc_delay_proxy", metric_or_null(base, kTiming, "abc_delay_proxy")},
                   {"adp_proxy", metric_or_null(base, kDownstream, "adp_proxy")},
                   {"downstream_score", metric_or_null(base, kDownstream, "downstream_score")}};
            for (auto* k : ds_keys)
                ds[k].push_back(d[k]);
            row["downstream"] = d;
            ++ds_runs;
        }
        runs.push_back(row);
    }

    json agg{{"run_count", runs.size()},
             {"final_success_rate", mean_of(fs_)},
             {"promotion_pass_rate", mean_of(pp)},
             {"compile_pass_rate", mean_of(cp)},
             {"avg_promoted_majors", mean_of(pm)}};
    if (ds_runs > 0) {
        json d{{"run_count", ds_runs}};
        for (auto* k : ds_keys)
            d[std::string("mean_") + k] = mean_of(ds[k]);
        agg["downstream"] = d;
    }
    return json{{"schema_version", kSchemaVersion}, {"runs", runs}, {"aggregate", agg}};
}

std::string render_report_table(const json& report)
{
    auto num = [](const json& v) {
        if (!v.is_number())
            return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", v.get<double>());
        return std::string(buf);
    };
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %8s %9s %8s %8s\n", "run", "success", "promotion", "compile", "promoted");
    out += line;
    for (auto& r : report.at("runs")) {
        std::snprintf(line, sizeof line, "%-40s %8s %9s %8s %8d\n", r.at("label").get<std::string>().c_str(),
                      r.at("final_success").get<bool>() ? "yes" : "no", num(r.at("promotion_pass")).c_str(),
                      num(r.at("compile_pass")).c_str(), r.at("promoted_major_count").get<int>());
        out += line;
    }
    auto& a = report.at("aggregate");
    std::snprintf(line, sizeof line, "%-40s %8s %9s %8s %8s\n", "mean", num(a.at("final_success_rate")).c_str(),
                  num(a.at("promotion_pass_rate")).c_str(), num(a.at("compile_pass_rate")).c_str(),
                  num(a.at("avg_promoted_majors")).c_str());
    out += line;
    if (a.contains("downstream")) {
        auto& d = a.at("downstream");
        out += "downstream (" + std::to_string(d.at("run_count").get<int>()) + " runs): cells " +
               num(d.at("mean_cell_count")) + ", mul " + num(d.at("mean_mul_cells")) + ", delay " +
               num(d.at("mean_abc_delay_proxy")) + ", adp " + num(d.at("mean_adp_proxy")) + ", score " +
               num(d.at("mean_downstream_score")) + "\n";
    }
    return out;
}

} // namespace rtlevo
