#include "rtlevo/gemm.hpp"

#include "rtlevo/error.hpp"

#include <array>
#include <random>
#include <sstream>

namespace rtlevo {

namespace {

constexpr std::uint64_t kVisibleSeed = 0x5EEDC0DEULL;
constexpr int kVisibleCount = 12;

std::vector<GemmProfile> build_profiles()
{
    std::vector<GemmProfile> out;

    GemmProfile mac;
    mac.id = "int4_int8_mac_pe";
    mac.description =
        "Mixed-precision multiply-accumulate processing element. On every rising edge of clk: if rst is "
        "high, acc_out becomes 0; otherwise acc_out becomes acc_in + a * b, where a is a signed 4-bit "
        "two's-complement operand, b is a signed 8-bit two's-complement operand, and the product is "
        "sign-extended before the addition. The accumulator is 32 bits wide and overflow wraps around "
        "(two's complement, no saturation).";
    mac.module_header = "module int4_int8_mac_pe(input clk, input rst, input signed [31:0] acc_in, "
                        "input signed [3:0] a, input signed [7:0] b, output reg signed [31:0] acc_out);";
    mac.inputs = {{"acc_in", 32, true}, {"a", 4, true}, {"b", 8, true}};
    mac.outputs = {{"acc_out", 32, true}};
    mac.clocked = true;
    mac.downstream.preferred_widths = {4, 8, 32};
    mac.downstream.expected_bw_hits = 4;
    mac.downstream.target_depth = 1;
    out.push_back(mac);

    GemmProfile dot;
    dot.id = "mixed_precision_dot4";
    dot.description =
        "Combinational four-lane mixed-precision dot product. Compute y = a0*b0 + a1*b1 + a2*b2 + a3*b3 "
        "where each a_j is a signed 4-bit two's-complement value and each b_j is a signed 8-bit "
        "two's-complement value. Products are sign-extended and summed into the signed 32-bit output y.";
    dot.module_header = "module mixed_precision_dot4(input signed [3:0] a0, input signed [3:0] a1, "
                        "input signed [3:0] a2, input signed [3:0] a3, input signed [7:0] b0, "
                        "input signed [7:0] b1, input signed [7:0] b2, input signed [7:0] b3, "
                        "output signed [31:0] y);";
    dot.inputs = {{"a0", 4, true}, {"a1", 4, true}, {"a2", 4, true}, {"a3", 4, true},
                  {"b0", 8, true}, {"b1", 8, true}, {"b2", 8, true}, {"b3", 8, true}};
    dot.outputs = {{"y", 32, true}};
    dot.downstream.preferred_widths = {4, 8, 32};
    dot.downstream.expected_bw_hits = 9;
    dot.downstream.target_depth = 0;
    out.push_back(dot);

    GemmProfile rq;
    rq.id = "requantize_int32_to_int8";
    rq.description =
        "Combinational requantizer from signed 32-bit to signed 8-bit. Divide the signed 32-bit input value "
        "by 2^shift (shift is unsigned, 0..15) rounding to the nearest integer with ties to even, then "
        "saturate the result to the signed 8-bit range [-128, 127] and drive it on q. With shift = 0 the "
        "value is only saturated.";
    rq.module_header = "module requantize_int32_to_int8(input signed [31:0] value, input [3:0] shift, "
                       "output signed [7:0] q);";
    rq.inputs = {{"value", 32, true}, {"shift", 4, false}};
    rq.outputs = {{"q", 8, true}};
    rq.downstream.preferred_widths = {8, 32};
    rq.downstream.expected_bw_hits = 2;
    rq.downstream.target_depth = 0;
    out.push_back(rq);

    return out;
}

const std::vector<GemmProfile>& profiles()
{
    static const std::vector<GemmProfile> p = build_profiles();
    return p;
}

void check_range(std::int64_t v, const PortSpec& port)
{
    if (v < port.min_value() || v > port.max_value())
        throw DomainError(port.name + " = " + std::to_string(v) + " outside [" + std::to_string(port.min_value()) +
                          ", " + std::to_string(port.max_value()) + "]");
}

std::uint64_t mask(int width) { return width >= 64 ? ~0ULL : ((1ULL << width) - 1); }

std::string hex_literal(std::int64_t v, int width)
{
    std::ostringstream ss;
    ss << width << "'h" << std::hex << (static_cast<std::uint64_t>(v) & mask(width));
    return ss.str();
}

std::string port_decl(const PortSpec& p)
{
    std::string s = p.is_signed ? "signed " : "";
    if (p.width > 1)
        s += "[" + std::to_string(p.width - 1) + ":0] ";
    return s + p.name;
}

std::uint64_t concat_key(const GemmProfile& profile, const GemmVector& v, int& total_width)
{
    std::uint64_t key = 0;
    total_width = 0;
    for (std::size_t i = 0; i < profile.inputs.size(); ++i) {
        int w = profile.inputs[i].width;
        key = (key << w) | (static_cast<std::uint64_t>(v[i]) & mask(w));
        total_width += w;
    }
    return key;
}

} // namespace

std::int64_t PortSpec::min_value() const { return is_signed ? -(std::int64_t{1} << (width - 1)) : 0; }

std::int64_t PortSpec::max_value() const
{
    return is_signed ? (std::int64_t{1} << (width - 1)) - 1 : (std::int64_t{1} << width) - 1;
}

const std::vector<std::string>& gemm_profile_ids()
{
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (auto& p : profiles())
            v.push_back(p.id);
        return v;
    }();
    return ids;
}

const GemmProfile& gemm_profile(std::string_view id)
{
    for (auto& p : profiles())
        if (p.id == id)
            return p;
    throw ConfigError("unsupported held-out profile '" + std::string(id) + "'");
}

std::int32_t mac_pe_step(std::int64_t acc, std::int64_t a4, std::int64_t b8)
{
    check_range(acc, {"acc_in", 32, true});
    check_range(a4, {"a", 4, true});
    check_range(b8, {"b", 8, true});
    std::int64_t wide = acc + a4 * b8;
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(static_cast<std::uint64_t>(wide)));
}

std::int32_t dot4(const std::array<std::int64_t, 4>& a4, const std::array<std::int64_t, 4>& b8)
{
    std::int64_t sum = 0;
    for (int j = 0; j < 4; ++j) {
        check_range(a4[j], {"a", 4, true});
        check_range(b8[j], {"b", 8, true});
        sum += a4[j] * b8[j];
    }
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(static_cast<std::uint64_t>(sum)));
}

std::int8_t requantize(std::int64_t value, std::int64_t shift)
{
    check_range(value, {"value", 32, true});
    check_range(shift, {"shift", 4, false});
    std::int64_t q = value;
    if (shift > 0) {
        std::int64_t floor_q = value >> shift;
        std::int64_t rem = value - (floor_q << shift);
        std::int64_t half = std::int64_t{1} << (shift - 1);
        if (rem > half || (rem == half && (floor_q & 1) != 0))
            ++floor_q;
        q = floor_q;
    }
    if (q > 127)
        q = 127;
    if (q < -128)
        q = -128;
    return static_cast<std::int8_t>(q);
}

std::vector<std::int64_t> reference_eval(const GemmProfile& profile, const GemmVector& in)
{
    if (in.size() != profile.inputs.size())
        throw DomainError(profile.id + ": expected " + std::to_string(profile.inputs.size()) + " inputs");
    for (std::size_t i = 0; i < in.size(); ++i)
        check_range(in[i], profile.inputs[i]);

    if (profile.id == "int4_int8_mac_pe")
        return {mac_pe_step(in[0], in[1], in[2])};
    if (profile.id == "mixed_precision_dot4")
        return {dot4({in[0], in[1], in[2], in[3]}, {in[4], in[5], in[6], in[7]})};
    if (profile.id == "requantize_int32_to_int8")
        return {requantize(in[0], in[1])};
    throw ConfigError("no reference model for profile " + profile.id);
}

std::vector<GemmVector> generate_cases(const GemmProfile& profile, std::uint64_t seed, int n)
{
    if (n < 1)
        throw PreconditionError("case count must be >= 1");
    // Plain modulo mapping over mt19937_64 keeps streams identical across
    // standard libraries (distributions are implementation-defined).
    std::mt19937_64 rng(seed);
    std::vector<GemmVector> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
        GemmVector v;
        for (auto& port : profile.inputs) {
            std::int64_t lo = port.min_value();
            std::int64_t hi = port.max_value();
            std::int64_t value;
            if (rng() % 4 == 0) {
                std::array<std::int64_t, 4> corners{lo, hi, 0, port.is_signed ? -1 : 1};
                value = corners[rng() % corners.size()];
            } else {
                auto span = static_cast<std::uint64_t>(hi - lo) + 1;
                value = lo + static_cast<std::int64_t>(rng() % span);
            }
            v.push_back(value);
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<GemmVector> visible_cases(const GemmProfile& profile)
{
    return generate_cases(profile, kVisibleSeed, kVisibleCount);
}

std::string emit_testbench(const GemmProfile& profile, const std::vector<GemmVector>& cases)
{
    std::ostringstream tb;
    tb << "`timescale 1ns/1ps\n";
    tb << "module tb;\n";
    if (profile.clocked) {
        tb << "  reg clk = 1'b0;\n";
        tb << "  reg rst = 1'b1;\n";
    }
    for (auto& p : profile.inputs)
        tb << "  reg " << port_decl(p) << " = " << hex_literal(0, p.width) << ";\n";
    for (auto& p : profile.outputs)
        tb << "  wire " << port_decl(p) << ";\n";
    tb << "  integer mismatches = 0;\n";
    tb << "  integer samples = 0;\n\n";

    tb << "  " << profile.id << " dut(";
    bool first = true;
    auto conn = [&](const std::string& name) {
        tb << (first ? "" : ", ") << "." << name << "(" << name << ")";
        first = false;
    };
    if (profile.clocked) {
        conn("clk");
        conn("rst");
    }
    for (auto& p : profile.inputs)
        conn(p.name);
    for (auto& p : profile.outputs)
        conn(p.name);
    tb << ");\n\n";

    if (profile.clocked)
        tb << "  always #5 clk = ~clk;\n\n";

    tb << "  initial begin\n";
    tb << "    #" << (cases.size() * 10 + 1000) << ";\n";
    tb << "    $display(\"TIMEOUT\");\n";
    tb << "    $finish;\n";
    tb << "  end\n\n";

    tb << "  initial begin\n";
    if (profile.clocked) {
        tb << "    @(negedge clk);\n";
        tb << "    rst = 1'b0;\n";
    }
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& v = cases[c];
        auto expected = reference_eval(profile, v);
        tb << "    // case " << c << "\n";
        for (std::size_t i = 0; i < profile.inputs.size(); ++i)
            tb << "    " << profile.inputs[i].name << " = " << hex_literal(v[i], profile.inputs[i].width) << ";\n";
        if (profile.clocked)
            tb << "    @(posedge clk);\n";
        tb << "    #1;\n";
        tb << "    samples = samples + 1;\n";
        for (std::size_t o = 0; o < profile.outputs.size(); ++o) {
            const auto& p = profile.outputs[o];
            tb << "    if (" << p.name << " !== " << hex_literal(expected[o], p.width) << ") begin\n";
            tb << "      mismatches = mismatches + 1;\n";
            tb << "      $display(\"case " << c << ": " << p.name << " = %h, expected %h\", " << p.name << ", "
               << hex_literal(expected[o], p.width) << ");\n";
            tb << "    end\n";
        }
    }
    tb << "    $display(\"Mismatches: %0d in %0d samples\", mismatches, samples);\n";
    tb << "    $finish;\n";
    tb << "  end\n";
    tb << "endmodule\n";
    return tb.str();
}

TaskSpec emit_task_spec(const GemmProfile& profile, const fs::path& out_dir)
{
    fs::path dir = out_dir / profile.id;
    fs::create_directories(dir);
    write_file_atomic(dir / "tb_visible.v", emit_testbench(profile, visible_cases(profile)));

    TaskSpec t;
    t.task_id = profile.id;
    t.description = profile.description;
    t.module_header = profile.module_header;
    t.visible_testbench = "tb_visible.v";
    t.heldout_profile = profile.id;
    t.tags = {"gemm", "mixed_precision", profile.clocked ? "sequential" : "combinational"};
    save_task_spec(t, dir / "task.json");
    return load_task_spec(dir / "task.json");
}

std::string golden_rtl(const GemmProfile& profile)
{
    if (profile.id == "int4_int8_mac_pe")
        return profile.module_header + "\n"
               "  wire signed [11:0] product = a * b;\n"
               "  always @(posedge clk) begin\n"
               "    if (rst)\n"
               "      acc_out <= 32'sd0;\n"
               "    else\n"
               "      acc_out <= acc_in + product;\n"
               "  end\n"
               "endmodule\n";
    if (profile.id == "mixed_precision_dot4")
        return profile.module_header + "\n"
               "  wire signed [11:0] p0 = a0 * b0;\n"
               "  wire signed [11:0] p1 = a1 * b1;\n"
               "  wire signed [11:0] p2 = a2 * b2;\n"
               "  wire signed [11:0] p3 = a3 * b3;\n"
               "  assign y = p0 + p1 + p2 + p3;\n"
               "endmodule\n";
    if (profile.id == "requantize_int32_to_int8")
        return profile.module_header + "\n"
               "  reg signed [31:0] floor_q;\n"
               "  reg [31:0] rem;\n"
               "  reg [31:0] half;\n"
               "  reg signed [32:0] rounded;\n"
               "  reg signed [7:0] q_r;\n"
               "  assign q = q_r;\n"
               "  always @* begin\n"
               "    floor_q = value >>> shift;\n"
               "    rem = value & ((32'd1 << shift) - 32'd1);\n"
               "    half = (shift == 4'd0) ? 32'd0 : (32'd1 << (shift - 4'd1));\n"
               "    rounded = floor_q;\n"
               "    if (shift != 4'd0 && (rem > half || (rem == half && floor_q[0])))\n"
               "      rounded = floor_q + 33'sd1;\n"
               "    if (rounded > 33'sd127)\n"
               "      q_r = 8'sd127;\n"
               "    else if (rounded < -33'sd128)\n"
               "      q_r = -8'sd128;\n"
               "    else\n"
               "      q_r = rounded[7:0];\n"
               "  end\n"
               "endmodule\n";
    throw ConfigError("no golden RTL for profile " + profile.id);
}

std::string overfit_rtl(const GemmProfile& profile, const std::vector<GemmVector>& cases)
{
    std::ostringstream rtl;
    rtl << profile.module_header << "\n";
    int key_width = 0;
    std::string key_expr = "{";
    for (std::size_t i = 0; i < profile.inputs.size(); ++i)
        key_expr += (i ? ", " : "") + profile.inputs[i].name;
    key_expr += "}";

    const auto& out = profile.outputs.front();
    auto emit_cases = [&](const std::string& indent, const std::string& target, const char* assign_op) {
        rtl << indent << "case (" << key_expr << ")\n";
        for (auto& v : cases) {
            std::uint64_t key = concat_key(profile, v, key_width);
            auto expected = reference_eval(profile, v);
            rtl << indent << "  " << hex_literal(static_cast<std::int64_t>(key), key_width) << ": " << target << " "
                << assign_op << " " << hex_literal(expected[0], out.width) << ";\n";
        }
        rtl << indent << "  default: " << target << " " << assign_op << " " << hex_literal(0, out.width) << ";\n";
        rtl << indent << "endcase\n";
    };

    if (profile.clocked) {
        rtl << "  always @(posedge clk) begin\n";
        rtl << "    if (rst)\n";
        rtl << "      " << out.name << " <= " << hex_literal(0, out.width) << ";\n";
        rtl << "    else begin\n";
        emit_cases("      ", out.name, "<=");
        rtl << "    end\n";
        rtl << "  end\n";
    } else {
        rtl << "  reg " << port_decl({out.name + "_r", out.width, out.is_signed}) << ";\n";
        rtl << "  assign " << out.name << " = " << out.name << "_r;\n";
        rtl << "  always @* begin\n";
        emit_cases("    ", out.name + "_r", "=");
        rtl << "  end\n";
    }
    rtl << "endmodule\n";
    return rtl.str();
}

} // namespace rtlevo
