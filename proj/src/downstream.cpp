#include "rtlevo/error.hpp"
#include "rtlevo/evaluators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

namespace rtlevo {

namespace {

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

const json& top_module(const json& netlist)
{
    if (!netlist.is_object() || !netlist.contains("modules") || !netlist.at("modules").is_object())
        throw ParseError("netlist has no modules object");
    const auto& mods = netlist.at("modules");
    if (mods.empty())
        throw ParseError("netlist has no modules");
    for (auto& [name, mod] : mods.items()) {
        auto attrs = mod.value("attributes", json::object());
        if (attrs.contains("top")) {
            const auto& t = attrs.at("top");
            if ((t.is_string() && t.get<std::string>().find('1') != std::string::npos) || (t.is_number() && t != 0))
                return mod;
        }
    }
    if (mods.size() == 1)
        return mods.begin().value();
    throw ParseError("netlist has several modules and none is marked top");
}

std::string classify(const std::string& type, const std::map<std::string, std::vector<std::string>>& patterns)
{
    std::string t = lower(type);
    for (const char* category : {"dff", "mul", "add", "mux"}) {
        auto it = patterns.find(category);
        if (it == patterns.end())
            continue;
        for (auto& p : it->second)
            if (t.find(lower(p)) != std::string::npos)
                return category;
    }
    return {};
}

bool preferred(const std::vector<int>& widths, std::size_t w)
{
    return std::find(widths.begin(), widths.end(), static_cast<int>(w)) != widths.end();
}

// Fewest register crossings from any input bit to each output bit (0-1 BFS
// over the bit graph, so feedback loops are harmless); the proxy is the
// largest such count over reachable outputs. Registers pass data D -> Q only.
int pipeline_depth(const json& mod, const std::map<std::string, std::vector<std::string>>& patterns)
{
    std::unordered_map<long long, std::vector<std::pair<long long, int>>> adj;
    std::vector<long long> sources;
    std::vector<long long> sinks;
    const json ports = mod.value("ports", json::object());
    for (auto& [name, port] : ports.items()) {
        std::string dir = port.value("direction", "");
        for (auto& b : port.value("bits", json::array())) {
            if (!b.is_number_integer())
                continue;
            if (dir == "input")
                sources.push_back(b.get<long long>());
            else if (dir == "output")
                sinks.push_back(b.get<long long>());
        }
    }
    const json cells = mod.value("cells", json::object());
    for (auto& [name, cell] : cells.items()) {
        bool reg = classify(cell.value("type", ""), patterns) == "dff";
        int w = reg ? 1 : 0;
        auto dirs = cell.value("port_directions", json::object());
        auto conns = cell.value("connections", json::object());
        std::vector<long long> ins;
        std::vector<long long> outs;
        for (auto& [pin, bits] : conns.items()) {
            std::string d = dirs.value(pin, "");
            // Clock, enable and reset pins of a register do not carry data.
            if (reg && d == "input" && pin != "D")
                continue;
            for (auto& b : bits) {
                if (!b.is_number_integer())
                    continue;
                if (d == "input")
                    ins.push_back(b.get<long long>());
                else if (d == "output")
                    outs.push_back(b.get<long long>());
            }
        }
        for (auto i : ins)
            for (auto o : outs)
                adj[i].emplace_back(o, w);
    }

    constexpr int inf = std::numeric_limits<int>::max();
    std::unordered_map<long long, int> dist;
    std::deque<long long> q;
    for (auto s : sources) {
        dist[s] = 0;
        q.push_back(s);
    }
    while (!q.empty()) {
        auto u = q.front();
        q.pop_front();
        int du = dist[u];
        auto it = adj.find(u);
        if (it == adj.end())
            continue;
        for (auto [v, w] : it->second) {
            auto dv = dist.find(v);
            int cur = dv == dist.end() ? inf : dv->second;
            if (du + w < cur) {
                dist[v] = du + w;
                if (w == 0)
                    q.push_front(v);
                else
                    q.push_back(v);
            }
        }
    }
    int depth = 0;
    for (auto s : sinks)
        if (auto it = dist.find(s); it != dist.end())
            depth = std::max(depth, it->second);
    return depth;
}

} // namespace

double downstream_score(const GemmMetrics& m, const DownstreamParams& p)
{
    double adp_term = m.adp_proxy ? *m.adp_proxy / p.adp_ref : 0.0;
    double bw_gap = std::max(0, p.expected_bw_hits - m.bitwidth_hits);
    return p.w_mul * m.mul_cells + p.w_adp * adp_term + p.w_bw * bw_gap +
           p.w_pipe * std::abs(m.pipeline_depth_proxy - p.target_depth);
}

GemmMetrics analyze_netlist(const json& netlist, const DownstreamParams& params,
                            const std::map<std::string, std::vector<std::string>>& cell_patterns)
{
    const json& mod = top_module(netlist);
    GemmMetrics m;
    const json cells = mod.value("cells", json::object());
    for (auto& [name, cell] : cells.items()) {
        auto c = classify(cell.value("type", ""), cell_patterns);
        if (c == "dff")
            ++m.dff_cells;
        else if (c == "mul")
            ++m.mul_cells;
        else if (c == "add")
            ++m.add_cells;
        else if (c == "mux")
            ++m.mux_cells;
    }
    std::set<std::string> port_names;
    const json ports = mod.value("ports", json::object());
    for (auto& [name, port] : ports.items()) {
        port_names.insert(name);
        if (preferred(params.preferred_widths, port.value("bits", json::array()).size()))
            ++m.bitwidth_hits;
    }
    const json netnames = mod.value("netnames", json::object());
    for (auto& [name, net] : netnames.items()) {
        if (port_names.count(name) || net.value("hide_name", 0) != 0)
            continue;
        if (preferred(params.preferred_widths, net.value("bits", json::array()).size()))
            ++m.bitwidth_hits;
    }
    m.pipeline_depth_proxy = pipeline_depth(mod, cell_patterns);
    m.downstream_score = downstream_score(m, params);
    return m;
}

DownstreamParams downstream_params_for(const TaskSpec* task)
{
    if (task && task->heldout_profile) {
        const auto& ids = gemm_profile_ids();
        if (std::find(ids.begin(), ids.end(), *task->heldout_profile) != ids.end())
            return gemm_profile(*task->heldout_profile).downstream;
    }
    return {};
}

EvaluatorResult evaluate_downstream(const fs::path& netlist_path, const DownstreamParams& params,
                                    std::optional<double> cell_count, std::optional<double> abc_delay_proxy,
                                    const EvaluatorConfig& config)
{
    if (!fs::exists(netlist_path))
        throw PreconditionError("netlist not found: " + netlist_path.string());
    GemmMetrics m;
    try {
        m = analyze_netlist(json::parse(read_file(netlist_path)), params, config.cell_patterns);
    } catch (const std::exception& e) {
        return make_result(kDownstream, Outcome::unknown_failure, std::string("unknown_failure: ") + e.what());
    }
    if (cell_count && abc_delay_proxy)
        m.adp_proxy = *cell_count * *abc_delay_proxy;
    m.downstream_score = downstream_score(m, params);
    std::map<std::string, double> metrics{
        {"mul_cells", m.mul_cells},
        {"add_cells", m.add_cells},
        {"dff_cells", m.dff_cells},
        {"mux_cells", m.mux_cells},
        {"bitwidth_hits", m.bitwidth_hits},
        {"pipeline_depth_proxy", m.pipeline_depth_proxy},
        {"downstream_score", m.downstream_score},
    };
    if (m.adp_proxy)
        metrics["adp_proxy"] = *m.adp_proxy;
    return make_result(kDownstream, Outcome::passed, {}, metrics);
}

} // namespace rtlevo
