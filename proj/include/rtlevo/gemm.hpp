#pragma once

#include "rtlevo/model.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace rtlevo {

/// Weights and references of the downstream aggregate
///   w_mul*mul + w_adp*(adp/adp_ref) + w_bw*max(0, expected - hits) + w_pipe*|depth - target|.
struct DownstreamParams {
    double w_mul = 0.5;
    double w_adp = 1.0;
    double w_bw = 0.25;
    double w_pipe = 0.25;
    double adp_ref = 100.0;
    std::vector<int> preferred_widths;
    int expected_bw_hits = 0;
    int target_depth = 0;
};

struct PortSpec {
    std::string name;
    int width = 1;
    bool is_signed = false;

    std::int64_t min_value() const;
    std::int64_t max_value() const;
};

struct GemmProfile {
    std::string id;
    std::string description;
    std::string module_header;
    std::vector<PortSpec> inputs;
    std::vector<PortSpec> outputs;
    /// Clocked profiles register outputs on posedge clk with synchronous rst.
    bool clocked = false;
    DownstreamParams downstream;
};

/// One stimulus: values in `inputs` order.
using GemmVector = std::vector<std::int64_t>;

const std::vector<std::string>& gemm_profile_ids();
/// Throws ConfigError for an unsupported profile id.
const GemmProfile& gemm_profile(std::string_view id);

// Arithmetic of the three profiles. Each throws DomainError outside its
// declared two's-complement ranges.
std::int32_t mac_pe_step(std::int64_t acc, std::int64_t a4, std::int64_t b8);
std::int32_t dot4(const std::array<std::int64_t, 4>& a4, const std::array<std::int64_t, 4>& b8);
std::int8_t requantize(std::int64_t value, std::int64_t shift);

/// Expected outputs (in `outputs` order) for one input vector.
std::vector<std::int64_t> reference_eval(const GemmProfile& profile, const GemmVector& inputs);

/// Seeded stimulus with boosted corner values (min, max, 0, -1).
std::vector<GemmVector> generate_cases(const GemmProfile& profile, std::uint64_t seed, int n);

/// Fixed small set used by the visible testbench.
std::vector<GemmVector> visible_cases(const GemmProfile& profile);

/// Self-checking testbench printing `Mismatches: N in M samples`.
std::string emit_testbench(const GemmProfile& profile, const std::vector<GemmVector>& cases);

/// Writes `<out>/<id>/task.json` and `tb_visible.v`; returns the loaded spec.
TaskSpec emit_task_spec(const GemmProfile& profile, const fs::path& out_dir);

/// Reference RTL that implements the profile's arithmetic.
std::string golden_rtl(const GemmProfile& profile);

/// Lookup-table RTL that reproduces only the given cases; it passes the
/// visible testbench and fails randomized held-out stimulus.
std::string overfit_rtl(const GemmProfile& profile, const std::vector<GemmVector>& cases);

} // namespace rtlevo
