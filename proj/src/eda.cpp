#include "rtlevo/error.hpp"
#include "rtlevo/evaluators.hpp"

#include <algorithm>
#include <sstream>

namespace rtlevo {

namespace {

std::optional<double> parse_number(const std::string& s)
{
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size())
            return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string upper(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

} // namespace

EdaReport parse_eda_report(std::string_view text)
{
    if (trim(text).empty())
        throw ParseError("empty EDA report");
    EdaReport r;
    bool saw_sec = false;
    std::map<std::string, std::optional<double>*> scalars{
        {"WNS", &r.wns}, {"TNS", &r.tns}, {"AREA", &r.area}, {"POWER", &r.power}};

    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty())
            continue;
        auto colon = line.find(':');
        if (colon == std::string::npos) {
            r.warnings.push_back("line " + std::to_string(lineno) + ": not a KEY: value line");
            continue;
        }
        std::string key = upper(trim(line.substr(0, colon)));
        std::string value = trim(line.substr(colon + 1));
        if (key == "SEC") {
            saw_sec = true;
            std::string v = upper(value);
            if (v == "PASS")
                r.sec_status = SecStatus::pass;
            else if (v == "FAIL")
                r.sec_status = SecStatus::fail;
            else
                r.warnings.push_back("line " + std::to_string(lineno) + ": unrecognised SEC status '" + value + "'");
        } else if (auto it = scalars.find(key); it != scalars.end()) {
            auto v = parse_number(value);
            if (!v)
                r.warnings.push_back("line " + std::to_string(lineno) + ": bad " + key + " value '" + value + "'");
            else
                *it->second = v;
        } else if (key == "PATH") {
            auto sp = value.find_last_of(" \t");
            std::optional<double> slack;
            if (sp != std::string::npos)
                slack = parse_number(trim(value.substr(sp + 1)));
            if (!slack)
                r.warnings.push_back("line " + std::to_string(lineno) + ": bad PATH entry '" + value + "'");
            else
                r.critical_paths.emplace_back(trim(value.substr(0, sp)), *slack);
        } else {
            r.warnings.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (!saw_sec)
        r.warnings.push_back("missing SEC");
    for (auto& [key, slot] : scalars)
        if (!*slot)
            r.warnings.push_back("missing " + key);
    if (r.wns && r.tns && *r.wns < 0 && *r.tns > 0)
        r.warnings.push_back("TNS is positive while WNS is negative");
    return r;
}

EvaluatorResult eda_result(const EdaReport& report)
{
    std::map<std::string, double> metrics;
    metrics["sec_pass"] = report.sec_status == SecStatus::pass ? 1.0 : 0.0;
    if (report.wns)
        metrics["wns"] = *report.wns;
    if (report.tns)
        metrics["tns"] = *report.tns;
    if (report.area)
        metrics["area"] = *report.area;
    if (report.power)
        metrics["power"] = *report.power;
    metrics["critical_path_count"] = static_cast<double>(report.critical_paths.size());

    std::string feedback;
    Outcome outcome = Outcome::passed;
    if (report.sec_status == SecStatus::fail) {
        outcome = Outcome::mismatch;
        feedback = "SEC failed: candidate is not sequentially equivalent to the reference";
    } else if (report.sec_status == SecStatus::unknown) {
        outcome = Outcome::unknown_failure;
        feedback = "SEC status unknown";
    }
    for (auto& [name, slack] : report.critical_paths)
        if (slack < 0)
            feedback += (feedback.empty() ? "" : "\n") + std::string("critical path ") + name + " slack " +
                        std::to_string(slack);
    for (auto& w : report.warnings)
        feedback += (feedback.empty() ? "" : "\n") + std::string("warning: ") + w;
    return make_result(kEda, outcome, feedback, metrics);
}

} // namespace rtlevo
