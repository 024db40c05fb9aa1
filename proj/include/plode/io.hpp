#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plode/analysis.hpp"
#include "plode/convert.hpp"
#include "plode/dynamics.hpp"
#include "plode/errors.hpp"
#include "plode/linalg.hpp"
#include "plode/model.hpp"

namespace plode {

// 17 significant digits: enough to reproduce any double bit for bit.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                   std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace detail {

// JSON number token; non-finite values have no JSON spelling and become null
inline std::string json_number(double v) {
    if (!std::isfinite(v)) return "null";
    return format_double(v);
}

inline std::string json_quote(const std::string& s) {
    std::string out = "\"";
    for (const char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char esc[8];
                    std::snprintf(esc, sizeof(esc), "\\u%04x",
                                  static_cast<unsigned>(static_cast<unsigned char>(ch)));
                    out += esc;
                } else {
                    out += ch;
                }
        }
    }
    out += '"';
    return out;
}

inline std::string json_real_array(const Vec& v) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += json_number(v[i]);
    }
    return out + "]";
}

inline std::string json_real_matrix(const Mat& a) {
    std::string out = "[";
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        if (r) out += ", ";
        out += json_real_array(a.row(r).transpose());
    }
    return out + "]";
}

inline std::string json_complex(const Complex& c) {
    return "[" + json_number(c.real()) + ", " + json_number(c.imag()) + "]";
}

inline std::string json_complex_array(const CVec& v) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += json_complex(v[i]);
    }
    return out + "]";
}

inline std::string json_complex_matrix(const CMat& a) {
    std::string out = "[";
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        if (r) out += ", ";
        out += "[";
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            if (c) out += ", ";
            out += json_complex(a(r, c));
        }
        out += "]";
    }
    return out + "]";
}

}  // namespace detail

inline std::string to_string(RealLogVerdict v) {
    switch (v) {
        case RealLogVerdict::yes: return "yes";
        case RealLogVerdict::no: return "no";
        default: return "no_singular";
    }
}

// ---- file plumbing ---------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// write to a sibling temp file, then rename over the target
inline void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write file: " + tmp);
        out << content;
        if (!out) throw Error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("cannot move " + tmp + " into place");
}

// ---- model files -----------------------------------------------------------

namespace detail {

using Json = nlohmann::json;

inline const Json& require_field(const Json& j, const char* key, const std::string& ctx) {
    const auto it = j.find(key);
    if (it == j.end())
        throw ParseError(ctx + ": missing field \"" + key + "\"");
    return *it;
}

inline void reject_unknown_fields(const Json& j, const std::set<std::string>& allowed,
                                  const std::string& ctx) {
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ParseError(ctx + ": unknown field \"" + item.key() + "\"");
}

inline double number_field(const Json& j, const std::string& what, const std::string& ctx) {
    if (!j.is_number())
        throw ParseError(ctx + ": field \"" + what + "\" must be a number");
    return j.get<double>();
}

inline Vec vector_field(const Json& j, Eigen::Index n, const std::string& what,
                        const std::string& ctx) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
        throw ParseError(ctx + ": field \"" + what + "\" must be an array of length " +
                         std::to_string(n));
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = number_field(j[static_cast<std::size_t>(i)], what, ctx);
    return v;
}

inline Mat matrix_field(const Json& j, Eigen::Index rows, Eigen::Index cols,
                        const std::string& what, const std::string& ctx) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw ParseError(ctx + ": field \"" + what + "\" must have " +
                         std::to_string(rows) + " rows");
    Mat a(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ParseError(ctx + ": field \"" + what + "\" row " + std::to_string(r) +
                             " must have " + std::to_string(cols) + " entries");
        for (Eigen::Index c = 0; c < cols; ++c)
            a(r, c) = number_field(row[static_cast<std::size_t>(c)], what, ctx);
    }
    return a;
}

inline Json parse_json(const std::string& text, const std::string& ctx) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(ctx + ": " + e.what());
    }
}

}  // namespace detail

inline PlrnnModel parse_model(const std::string& text, const std::string& source) {
    const auto j = detail::parse_json(text, source);
    if (!j.is_object()) throw ParseError(source + ": model file must hold a JSON object");
    detail::reject_unknown_fields(j, {"dim", "a_diag", "w", "h", "dt", "input_dim", "c"},
                                  source);

    const auto& dim_j = detail::require_field(j, "dim", source);
    if (!dim_j.is_number_integer() || dim_j.get<std::int64_t>() < 1)
        throw ParseError(source + ": field \"dim\" must be a positive integer");
    const auto m = static_cast<Eigen::Index>(dim_j.get<std::int64_t>());

    PlrnnModel model;
    model.a_diag = detail::vector_field(detail::require_field(j, "a_diag", source), m,
                                        "a_diag", source);
    model.w = detail::matrix_field(detail::require_field(j, "w", source), m, m, "w", source);
    model.h = detail::vector_field(detail::require_field(j, "h", source), m, "h", source);
    model.dt = detail::number_field(detail::require_field(j, "dt", source), "dt", source);

    const bool has_k = j.contains("input_dim");
    const bool has_c = j.contains("c");
    if (has_c && !has_k)
        throw ParseError(source + ": missing field \"input_dim\" (required with \"c\")");
    if (has_k) {
        const auto& k_j = j["input_dim"];
        if (!k_j.is_number_integer() || k_j.get<std::int64_t>() < 0)
            throw ParseError(source + ": field \"input_dim\" must be a non-negative integer");
        const auto k = static_cast<Eigen::Index>(k_j.get<std::int64_t>());
        if (k > 0 && !has_c)
            throw ParseError(source + ": missing field \"c\" (required with input_dim > 0)");
        model.c = has_c ? detail::matrix_field(j["c"], m, k, "c", source) : Mat(m, 0);
    } else {
        model.c = Mat(m, 0);
    }

    model.validate();
    return model;
}

inline PlrnnModel load_model(const std::string& path) {
    return parse_model(read_text_file(path), path);
}

inline std::string model_to_json(const PlrnnModel& model) {
    std::string out = "{\n";
    out += "  \"dim\": " + std::to_string(model.dim()) + ",\n";
    out += "  \"a_diag\": " + detail::json_real_array(model.a_diag) + ",\n";
    out += "  \"w\": " + detail::json_real_matrix(model.w) + ",\n";
    out += "  \"h\": " + detail::json_real_array(model.h) + ",\n";
    out += "  \"dt\": " + detail::json_number(model.dt);
    if (model.input_dim() > 0) {
        out += ",\n  \"input_dim\": " + std::to_string(model.input_dim());
        out += ",\n  \"c\": " + detail::json_real_matrix(model.c);
    }
    out += "\n}\n";
    return out;
}

inline void save_model(const std::string& path, const PlrnnModel& model) {
    write_text_atomic(path, model_to_json(model));
}

// ---- converted-system files ------------------------------------------------

namespace detail {

inline std::string report_rows_json(const std::vector<RegionReport>& rows) {
    std::string out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out += "    {\"ordinal\": " + std::to_string(r.ordinal);
        out += ", \"converted\": " + std::string(r.converted() ? "true" : "false");
        out += ", \"invertible\": " + std::string(r.invertible ? "true" : "false");
        out += ", \"unit_eig_count\": " + std::to_string(r.unit_eig_count);
        out += ", \"diagonalizable\": " + std::string(r.diagonalizable ? "true" : "false");
        out += ", \"real_log_verdict\": " + json_quote(to_string(r.real_log_verdict));
        out += ", \"theorem\": " + json_quote(to_string(r.theorem_used));
        out += ", \"realness\": " + json_quote(to_string(r.realness));
        out += ", \"max_imag\": " + json_number(r.max_imag);
        out += ", \"roundtrip_residual\": " + json_number(r.roundtrip_residual);
        out += ", \"equivalence_residual\": " + json_number(r.equivalence_residual);
        out += ", \"error\": " + (r.error.empty() ? "null" : json_quote(r.error)) + "}";
        out += (i + 1 < rows.size()) ? ",\n" : "\n";
    }
    return out;
}

}  // namespace detail

inline std::string conversion_report_to_json(const ConversionReport& report) {
    return "{\n  \"regions\": [\n" + detail::report_rows_json(report.regions) + "  ]\n}\n";
}

inline std::string converted_to_json(const ConvertedModel& converted) {
    std::string out = "{\n";
    out += "  \"dt\": " + detail::json_number(converted.dt) + ",\n";
    out += "  \"regions\": [\n";
    for (std::size_t i = 0; i < converted.regions.size(); ++i) {
        const auto& crs = converted.regions[i];
        out += "    {\"ordinal\": " + std::to_string(crs.region.ordinal());
        out += ", \"w_tilde\": " + detail::json_complex_matrix(crs.w_tilde);
        out += ", \"h_tilde\": " + detail::json_complex_array(crs.h_tilde);
        out += ", \"theorem\": " + detail::json_quote(to_string(crs.theorem_used));
        out += ", \"realness\": " + detail::json_quote(to_string(crs.realness)) + "}";
        out += (i + 1 < converted.regions.size()) ? ",\n" : "\n";
    }
    out += "  ],\n";
    out += "  \"report\": [\n" + detail::report_rows_json(converted.report.regions);
    out += "  ]\n}\n";
    return out;
}

inline void save_converted(const std::string& path, const ConvertedModel& converted) {
    write_text_atomic(path, converted_to_json(converted));
}

namespace detail {

inline Complex complex_entry(const Json& j, const std::string& what, const std::string& ctx) {
    if (j.is_number()) return Complex(j.get<double>(), 0.0);
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return Complex(j[0].get<double>(), j[1].get<double>());
    throw ParseError(ctx + ": entries of \"" + what + "\" must be numbers or [re, im] pairs");
}

inline Theorem theorem_from_string(const std::string& s, const std::string& ctx) {
    if (s == "T1") return Theorem::t1;
    if (s == "T2") return Theorem::t2;
    if (s == "T3") return Theorem::t3;
    throw ParseError(ctx + ": field \"theorem\" must be one of \"T1\", \"T2\", \"T3\"");
}

inline Realness realness_from_string(const std::string& s, const std::string& ctx) {
    if (s == "real") return Realness::real;
    if (s == "projected") return Realness::projected;
    if (s == "complex") return Realness::complex_log;
    throw ParseError(ctx +
                     ": field \"realness\" must be \"real\", \"projected\" or \"complex\"");
}

}  // namespace detail

inline ConvertedModel parse_converted(const std::string& text, const std::string& source) {
    const auto j = detail::parse_json(text, source);
    if (!j.is_object())
        throw ParseError(source + ": converted-system file must hold a JSON object");
    const auto& dt_j = detail::require_field(j, "dt", source);
    const auto& regions_j = detail::require_field(j, "regions", source);
    if (!dt_j.is_number() || !(dt_j.get<double>() > 0.0))
        throw ParseError(source + ": field \"dt\" must be a positive number");
    if (!regions_j.is_array())
        throw ParseError(source + ": field \"regions\" must be an array");

    ConvertedModel out;
    out.dt = dt_j.get<double>();
    for (const auto& rj : regions_j) {
        if (!rj.is_object())
            throw ParseError(source + ": each region must be a JSON object");
        detail::reject_unknown_fields(
            rj, {"ordinal", "w_tilde", "h_tilde", "theorem", "realness"}, source);
        const auto& ord_j = detail::require_field(rj, "ordinal", source);
        if (!ord_j.is_number_integer() || ord_j.get<std::int64_t>() < 0)
            throw ParseError(source + ": field \"ordinal\" must be a non-negative integer");
        const auto ordinal = ord_j.get<std::uint64_t>();

        const auto& h_j = detail::require_field(rj, "h_tilde", source);
        if (!h_j.is_array() || h_j.empty())
            throw ParseError(source + ": field \"h_tilde\" must be a non-empty array");
        const auto m = static_cast<Eigen::Index>(h_j.size());
        if (m < 64 && (ordinal >> m) != 0)
            throw ParseError(source + ": ordinal " + std::to_string(ordinal) +
                             " does not fit a " + std::to_string(m) + "-unit model");

        ContinuousRegionSystem crs;
        crs.region = RegionIndex::from_ordinal(ordinal, static_cast<int>(m));
        crs.h_tilde = CVec(m);
        for (Eigen::Index i = 0; i < m; ++i)
            crs.h_tilde[i] = detail::complex_entry(h_j[static_cast<std::size_t>(i)],
                                                   "h_tilde", source);

        const auto& w_j = detail::require_field(rj, "w_tilde", source);
        if (!w_j.is_array() || static_cast<Eigen::Index>(w_j.size()) != m)
            throw ParseError(source + ": field \"w_tilde\" must have " + std::to_string(m) +
                             " rows");
        crs.w_tilde = CMat(m, m);
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto& row = w_j[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m)
                throw ParseError(source + ": field \"w_tilde\" row " + std::to_string(r) +
                                 " must have " + std::to_string(m) + " entries");
            for (Eigen::Index c = 0; c < m; ++c)
                crs.w_tilde(r, c) = detail::complex_entry(row[static_cast<std::size_t>(c)],
                                                          "w_tilde", source);
        }

        const auto& th_j = detail::require_field(rj, "theorem", source);
        const auto& re_j = detail::require_field(rj, "realness", source);
        if (!th_j.is_string() || !re_j.is_string())
            throw ParseError(source + ": fields \"theorem\" and \"realness\" must be strings");
        crs.theorem_used = detail::theorem_from_string(th_j.get<std::string>(), source);
        crs.realness = detail::realness_from_string(re_j.get<std::string>(), source);

        // the offset map is derived state: rebuild it so loaded systems can
        // still fold per-step inputs
        try {
            const CMat integral = integral_exp(crs.w_tilde, out.dt);
            Eigen::FullPivLU<CMat> lu(integral);
            if (lu.isInvertible()) crs.h_map = lu.inverse();
        } catch (const Error&) {
            // leave h_map empty; input-driven simulation will refuse cleanly
        }
        out.regions.push_back(std::move(crs));
    }
    return out;
}

inline ConvertedModel load_converted(const std::string& path) {
    return parse_converted(read_text_file(path), path);
}

// ---- analysis reports ------------------------------------------------------

inline std::string equivalence_report_to_json(const EquivalenceReport& report) {
    std::string out = "{\n";
    out += "  \"max_residual\": " + detail::json_number(report.max_residual()) + ",\n";
    out += "  \"trajectories\": [\n";
    for (std::size_t i = 0; i < report.trajectories.size(); ++i) {
        const auto& row = report.trajectories[i];
        out += "    {\"max_residual\": " + detail::json_number(row.max_residual);
        out += ", \"mode_gap\": " + detail::json_number(row.mode_gap);
        out += ", \"regions_visited\": [";
        bool first = true;
        for (const auto ord : row.regions_visited) {
            if (!first) out += ", ";
            out += std::to_string(ord);
            first = false;
        }
        out += "], \"residual_at_step\": [";
        for (std::size_t k = 0; k < row.residual_at_step.size(); ++k) {
            if (k) out += ", ";
            out += detail::json_number(row.residual_at_step[k]);
        }
        out += "]}";
        out += (i + 1 < report.trajectories.size()) ? ",\n" : "\n";
    }
    out += "  ]\n}\n";
    return out;
}

inline std::string grazing_to_json(const GrazingResiduals& r) {
    std::string out = "{\n";
    out += "  \"on_border\": " + detail::json_number(r.on_border) + ",\n";
    out += "  \"gradient_norm\": " + detail::json_number(r.gradient_norm) + ",\n";
    out += "  \"tangency_1\": " + detail::json_number(r.tangency_1) + ",\n";
    out += "  \"tangency_2\": " + detail::json_number(r.tangency_2) + ",\n";
    out += "  \"curvature_1\": " + detail::json_number(r.curvature_1) + ",\n";
    out += "  \"curvature_2\": " + detail::json_number(r.curvature_2) + "\n";
    out += "}\n";
    return out;
}

// ---- CSV -------------------------------------------------------------------

inline std::string trajectory_to_csv(const Trajectory& traj) {
    if (traj.states.empty()) return "t,region_ordinal\n";
    const auto m = traj.states.front().size();
    std::string out = "t";
    for (Eigen::Index i = 1; i <= m; ++i) out += ",z" + std::to_string(i);
    out += ",region_ordinal\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        out += format_double(traj.times[k]);
        for (Eigen::Index i = 0; i < m; ++i) out += "," + format_double(traj.states[k][i]);
        out += "," + std::to_string(traj.regions[k].ordinal()) + "\n";
    }
    return out;
}

inline std::string events_to_csv(const Trajectory& traj) {
    std::string out = "t,coordinate,direction\n";
    for (const auto& ev : traj.events) {
        out += format_double(ev.time) + "," + std::to_string(ev.coordinate) + "," +
               std::to_string(ev.direction) + "\n";
    }
    return out;
}

inline std::string flow_field_to_csv(const std::vector<FlowSample>& samples) {
    if (samples.empty()) return "region_ordinal,equilibrium\n";
    const auto m = samples.front().point.size();
    std::string out;
    for (Eigen::Index i = 1; i <= m; ++i) out += "p" + std::to_string(i) + ",";
    for (Eigen::Index i = 1; i <= m; ++i) out += "v" + std::to_string(i) + ",";
    out += "region_ordinal,equilibrium\n";
    for (const auto& s : samples) {
        for (Eigen::Index i = 0; i < m; ++i) out += format_double(s.point[i]) + ",";
        for (Eigen::Index i = 0; i < m; ++i) out += format_double(s.velocity[i]) + ",";
        out += std::to_string(s.region.ordinal()) + "," +
               (s.equilibrium_candidate ? std::string("1") : std::string("0")) + "\n";
    }
    return out;
}

} // namespace plode
