// plode: convert ReLU piecewise-linear RNNs into equivalent continuous-time
// piecewise-linear ODE systems, simulate both, and compare them.
//
// Exit codes: 0 success; 1 failure (bad input data, unmet tolerance, hard
// errors); 2 usage errors and partial conversions.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plode/plode.hpp"

namespace {

using namespace plode;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64; the --seed flag fully determines any drawn start state
struct SeedStream {
    std::uint64_t state;
    explicit SeedStream(std::uint64_t seed) : state(seed) {}
    double next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z = z ^ (z >> 31);
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }
};

double parse_double_token(const std::string& token, const std::string& what) {
    double v = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw UsageError(what + ": cannot parse number \"" + token + "\"");
    return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const auto next = text.find(sep, pos);
        if (next == std::string::npos) {
            parts.push_back(text.substr(pos));
            return parts;
        }
        parts.push_back(text.substr(pos, next - pos));
        pos = next + 1;
    }
}

Vec parse_state_list(const std::string& text, int m) {
    const auto parts = split(text, ',');
    if (static_cast<int>(parts.size()) != m)
        throw UsageError("--z0 needs " + std::to_string(m) + " comma-separated values, got " +
                         std::to_string(parts.size()));
    Vec z(m);
    for (int i = 0; i < m; ++i) z[i] = parse_double_token(parts[i], "--z0");
    return z;
}

Vec resolve_start(const std::string& z0_text, std::uint64_t seed, int m) {
    if (!z0_text.empty()) return parse_state_list(z0_text, m);
    SeedStream stream(seed);
    Vec z(m);
    for (int i = 0; i < m; ++i) z[i] = -2.0 + 4.0 * stream.next();
    return z;
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content;
    else
        write_text_atomic(out_path, content);
}

SimMode mode_from_string(const std::string& mode) {
    return mode == "event-driven" ? SimMode::event_driven : SimMode::step_anchored;
}

ConvertedModel obtain_converted(const PlrnnModel& model, const std::string& converted_path) {
    if (converted_path.empty()) return convert_model(model);
    return load_converted(converted_path);
}

// ---- convert ----------------------------------------------------------------

int cmd_convert(const std::string& model_path, const std::string& out_path) {
    const auto model = load_model(model_path);
    const auto converted = convert_model(model);
    emit(out_path, converted_to_json(converted));

    int failed = 0;
    for (const auto& row : converted.report.regions)
        if (!row.converted()) {
            failed += 1;
            std::cerr << "region " << row.ordinal << " failed: " << row.error << "\n";
        }
    std::cerr << "converted " << converted.regions.size() << " of "
              << converted.report.regions.size() << " regions\n";
    return failed == 0 ? 0 : 2;
}

// ---- simulate ----------------------------------------------------------------

int cmd_simulate(const std::string& model_path, const std::string& converted_path,
                 const std::string& out_path, const std::string& events_path,
                 const std::string& z0_text, std::uint64_t seed, int steps,
                 const std::string& mode, double dense_dt, bool discrete) {
    const auto model = load_model(model_path);
    const Vec z0 = resolve_start(z0_text, seed, model.dim());

    Trajectory traj;
    if (discrete) {
        traj = simulate_discrete(model, z0, steps);
    } else {
        const auto converted = obtain_converted(model, converted_path);
        traj = simulate_continuous(model, converted, z0, steps * model.dt,
                                   mode_from_string(mode), dense_dt);
    }
    emit(out_path, trajectory_to_csv(traj));
    if (!events_path.empty()) write_text_atomic(events_path, events_to_csv(traj));
    return 0;
}

// ---- compare -----------------------------------------------------------------

int cmd_compare(const std::string& model_path, const std::string& converted_path,
                const std::string& out_path, const std::string& z0_text,
                std::uint64_t seed, int steps, double tolerance) {
    const auto model = load_model(model_path);
    const auto converted = obtain_converted(model, converted_path);
    const Vec z0 = resolve_start(z0_text, seed, model.dim());

    const auto report = run_equivalence_suite(model, converted, {z0}, steps);

    if (!out_path.empty()) {
        write_text_atomic(out_path, equivalence_report_to_json(report));
        const std::filesystem::path out(out_path);
        const auto base = (out.parent_path() / out.stem()).string();
        write_text_atomic(base + ".discrete.csv",
                          trajectory_to_csv(simulate_discrete(model, z0, steps)));
        write_text_atomic(base + ".continuous.csv",
                          trajectory_to_csv(simulate_continuous(
                              model, converted, z0, steps * model.dt,
                              SimMode::step_anchored, model.dt)));
    }

    const double max_residual = report.max_residual();
    std::cout << "max_residual=" << format_double(max_residual) << "\n";
    return max_residual <= tolerance ? 0 : 1;
}

// ---- flowfield ---------------------------------------------------------------

struct GridAxis {
    int dim = 0;  // 1-based
    double lo = 0.0;
    double hi = 0.0;
    long long count = 0;
};

std::vector<GridAxis> parse_grid_spec(const std::string& spec, int m) {
    if (spec.empty()) throw UsageError("--grid must not be empty");
    std::vector<GridAxis> axes;
    std::vector<bool> seen(static_cast<std::size_t>(m), false);
    for (const auto& entry : split(spec, ',')) {
        const auto fields = split(entry, ':');
        if (fields.size() != 4)
            throw UsageError("--grid entry \"" + entry + "\" must be dim:min:max:count");
        GridAxis axis;
        axis.dim = static_cast<int>(parse_double_token(fields[0], "--grid dim"));
        axis.lo = parse_double_token(fields[1], "--grid min");
        axis.hi = parse_double_token(fields[2], "--grid max");
        axis.count = static_cast<long long>(parse_double_token(fields[3], "--grid count"));
        if (axis.dim < 1 || axis.dim > m)
            throw UsageError("--grid dimension " + std::to_string(axis.dim) +
                             " is outside 1.." + std::to_string(m));
        if (seen[static_cast<std::size_t>(axis.dim - 1)])
            throw UsageError("--grid lists dimension " + std::to_string(axis.dim) + " twice");
        seen[static_cast<std::size_t>(axis.dim - 1)] = true;
        if (axis.count < 1)
            throw UsageError("--grid count must be at least 1");
        if (!(axis.lo <= axis.hi))
            throw UsageError("--grid needs min <= max");
        axes.push_back(axis);
    }
    return axes;
}

int cmd_flowfield(const std::string& model_path, const std::string& converted_path,
                  const std::string& out_path, const std::string& grid_spec,
                  const std::string& z0_text, std::uint64_t seed) {
    const auto model = load_model(model_path);
    const auto axes = parse_grid_spec(grid_spec, model.dim());

    double total = 1.0;
    for (const auto& axis : axes) total *= static_cast<double>(axis.count);
    if (total > 1e7)
        throw UsageError("--grid describes " +
                         std::to_string(static_cast<long long>(total)) +
                         " points; the cap is 1e7");

    // unlisted coordinates stay frozen at the anchor state
    const Vec anchor = z0_text.empty() && seed == 0
                           ? Vec::Zero(model.dim())
                           : resolve_start(z0_text, seed, model.dim());

    std::vector<Vec> points;
    points.reserve(static_cast<std::size_t>(total));
    std::vector<long long> idx(axes.size(), 0);
    while (true) {
        Vec p = anchor;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& axis = axes[a];
            const double frac = axis.count == 1
                                    ? 0.0
                                    : static_cast<double>(idx[a]) /
                                          static_cast<double>(axis.count - 1);
            p[axis.dim - 1] = axis.lo + frac * (axis.hi - axis.lo);
        }
        points.push_back(std::move(p));
        // odometer: last listed axis varies fastest
        std::size_t a = axes.size();
        while (a > 0) {
            a -= 1;
            idx[a] += 1;
            if (idx[a] < axes[a].count) break;
            idx[a] = 0;
            if (a == 0) {
                const auto converted = obtain_converted(model, converted_path);
                emit(out_path, flow_field_to_csv(sample_flow_field(converted, points)));
                return 0;
            }
        }
    }
}

// ---- regions -----------------------------------------------------------------

int cmd_regions(const std::string& model_path, const std::string& out_path) {
    const auto model = load_model(model_path);
    const auto converted = convert_model(model, /*require_any=*/false);
    emit(out_path, conversion_report_to_json(converted.report));

    int failed = 0;
    for (const auto& row : converted.report.regions)
        if (!row.converted()) failed += 1;
    std::cerr << "converted " << (converted.report.regions.size() - failed) << " of "
              << converted.report.regions.size() << " regions\n";
    return failed == 0 ? 0 : 2;
}

// ---- graze -------------------------------------------------------------------

const ContinuousRegionSystem& find_side(const ConvertedModel& converted,
                                        std::uint64_t ordinal) {
    for (const auto& crs : converted.regions)
        if (crs.region.ordinal() == ordinal) return crs;
    for (const auto& row : converted.report.regions)
        if (row.ordinal == ordinal && !row.converted())
            throw NotConvertibleError("region " + std::to_string(ordinal) +
                                      " was not converted: " + row.error);
    throw NotConvertibleError("region " + std::to_string(ordinal) +
                              " is missing from the converted system");
}

std::string graze_json(std::uint64_t r1, std::uint64_t r2, int coord, const Vec& state,
                       const GrazingResiduals& res) {
    std::string out = "{\n";
    out += "  \"region_1\": " + std::to_string(r1) + ",\n";
    out += "  \"region_2\": " + std::to_string(r2) + ",\n";
    out += "  \"coordinate\": " + std::to_string(coord) + ",\n";
    out += "  \"state\": " + plode::detail::json_real_array(state) + ",\n";
    out += "  \"residuals\": {\"on_border\": " + format_double(res.on_border);
    out += ", \"gradient_norm\": " + format_double(res.gradient_norm);
    out += ", \"tangency_1\": " + format_double(res.tangency_1);
    out += ", \"tangency_2\": " + format_double(res.tangency_2);
    out += ", \"curvature_1\": " + format_double(res.curvature_1);
    out += ", \"curvature_2\": " + format_double(res.curvature_2) + "}\n}\n";
    return out;
}

int cmd_graze(const std::string& model_path, const std::string& converted_path,
              const std::string& out_path, const std::string& z0_text, std::uint64_t seed,
              int coord, std::int64_t region1, std::int64_t region2, bool eval_only) {
    const auto model = load_model(model_path);
    if (coord < 1 || coord > model.dim())
        throw UsageError("--coord must lie in 1.." + std::to_string(model.dim()));
    const auto converted = obtain_converted(model, converted_path);
    const Vec z0 = resolve_start(z0_text, seed, model.dim());

    const auto bit = static_cast<std::size_t>(coord - 1);
    std::uint64_t ord1, ord2;
    if (region1 >= 0 && region2 >= 0) {
        ord1 = static_cast<std::uint64_t>(region1);
        ord2 = static_cast<std::uint64_t>(region2);
        if ((ord1 ^ ord2) != (std::uint64_t{1} << bit))
            throw UsageError("--region1 and --region2 must differ exactly in bit " +
                             std::to_string(coord));
    } else if (region1 < 0 && region2 < 0) {
        auto side = classify_state(z0);
        side.bits[bit] = 1;
        ord1 = side.ordinal();
        side.bits[bit] = 0;
        ord2 = side.ordinal();
    } else {
        throw UsageError("--region1 and --region2 must be given together");
    }

    const auto& side_1 = find_side(converted, ord1);
    const auto& side_2 = find_side(converted, ord2);

    if (eval_only) {
        const auto res = grazing_residuals(side_1, side_2, z0, coord);
        emit(out_path, graze_json(ord1, ord2, coord, z0, res));
        return 0;
    }

    const auto candidate = find_grazing_candidate(side_1, side_2, z0, coord);
    if (!candidate) {
        std::cerr << "no grazing candidate found from the given seed state\n";
        return 2;
    }
    emit(out_path, graze_json(ord1, ord2, coord, candidate->state, candidate->residuals));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"piecewise-linear RNN to continuous-time ODE conversion toolkit"};
    app.require_subcommand(1);

    std::string model_path, converted_path, out_path, events_path;
    std::string z0_text, mode = "step-anchored", grid_spec;
    std::uint64_t seed = 0;
    int steps = 50;
    double dense_dt = 0.0, tolerance = 1e-8;
    std::int64_t region1 = -1, region2 = -1;
    int coord = 1;
    bool discrete = false, eval_only = false;

    auto* convert_cmd =
        app.add_subcommand("convert", "convert a model file to a continuous system");
    convert_cmd->add_option("--model", model_path, "model JSON file")->required();
    convert_cmd->add_option("--out", out_path, "output path (default: stdout)");

    auto* simulate_cmd = app.add_subcommand("simulate", "integrate one trajectory to CSV");
    simulate_cmd->add_option("--model", model_path, "model JSON file")->required();
    simulate_cmd->add_option("--converted", converted_path,
                             "reuse a converted-system file instead of converting");
    simulate_cmd->add_option("--out", out_path, "trajectory CSV path (default: stdout)");
    simulate_cmd->add_option("--events-out", events_path, "boundary-event CSV path");
    simulate_cmd->add_option("--z0", z0_text, "comma-separated start state");
    simulate_cmd->add_option("--steps", steps, "number of dt steps")
        ->check(CLI::Range(1, 1000000000));
    simulate_cmd->add_option("--mode", mode, "continuous-time sampling mode")
        ->check(CLI::IsMember({"step-anchored", "event-driven"}));
    simulate_cmd->add_option("--dense-dt", dense_dt, "dense sample spacing (default dt/64)");
    simulate_cmd->add_option("--seed", seed, "seed for a drawn start state");
    simulate_cmd->add_flag("--discrete", discrete, "iterate the discrete map instead");

    auto* compare_cmd =
        app.add_subcommand("compare", "check discrete/continuous step equivalence");
    compare_cmd->add_option("--model", model_path, "model JSON file")->required();
    compare_cmd->add_option("--converted", converted_path,
                            "use this converted-system file instead of converting");
    compare_cmd->add_option("--out", out_path,
                            "report JSON path; also writes <base>.discrete.csv and "
                            "<base>.continuous.csv");
    compare_cmd->add_option("--z0", z0_text, "comma-separated start state");
    compare_cmd->add_option("--steps", steps, "number of dt steps")
        ->check(CLI::Range(1, 1000000000));
    compare_cmd->add_option("--tol", tolerance, "pass/fail residual tolerance");
    compare_cmd->add_option("--seed", seed, "seed for a drawn start state");

    auto* flowfield_cmd = app.add_subcommand("flowfield", "sample the vector field to CSV");
    flowfield_cmd->add_option("--model", model_path, "model JSON file")->required();
    flowfield_cmd->add_option("--converted", converted_path,
                              "reuse a converted-system file instead of converting");
    flowfield_cmd->add_option("--grid", grid_spec, "dim:min:max:count[,dim:min:max:count...]")
        ->required();
    flowfield_cmd->add_option("--z0", z0_text, "anchor state for unlisted dimensions");
    flowfield_cmd->add_option("--seed", seed, "seed for a drawn anchor state");
    flowfield_cmd->add_option("--out", out_path, "flow-field CSV path (default: stdout)");

    auto* regions_cmd =
        app.add_subcommand("regions", "report per-region conversion outcomes");
    regions_cmd->add_option("--model", model_path, "model JSON file")->required();
    regions_cmd->add_option("--out", out_path, "report JSON path (default: stdout)");

    auto* graze_cmd =
        app.add_subcommand("graze", "evaluate or refine border-tangency conditions");
    graze_cmd->add_option("--model", model_path, "model JSON file")->required();
    graze_cmd->add_option("--converted", converted_path,
                          "reuse a converted-system file instead of converting");
    graze_cmd->add_option("--coord", coord, "border coordinate (1-based)")->required();
    graze_cmd->add_option("--region1", region1, "ordinal of the side-1 region");
    graze_cmd->add_option("--region2", region2, "ordinal of the side-2 region");
    graze_cmd->add_option("--z0", z0_text, "seed state (refined unless --eval-only)");
    graze_cmd->add_option("--seed", seed, "seed for a drawn start state");
    graze_cmd->add_flag("--eval-only", eval_only, "evaluate residuals at --z0 as given");
    graze_cmd->add_option("--out", out_path, "result JSON path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (convert_cmd->parsed()) return cmd_convert(model_path, out_path);
        if (simulate_cmd->parsed())
            return cmd_simulate(model_path, converted_path, out_path, events_path, z0_text,
                                seed, steps, mode, dense_dt, discrete);
        if (compare_cmd->parsed())
            return cmd_compare(model_path, converted_path, out_path, z0_text, seed, steps,
                               tolerance);
        if (flowfield_cmd->parsed())
            return cmd_flowfield(model_path, converted_path, out_path, grid_spec, z0_text,
                                 seed);
        if (regions_cmd->parsed()) return cmd_regions(model_path, out_path);
        if (graze_cmd->parsed())
            return cmd_graze(model_path, converted_path, out_path, z0_text, seed, coord,
                             region1, region2, eval_only);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
