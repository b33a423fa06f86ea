#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfl/experiments.hpp"
#include "hfl/metrics.hpp"

// Report emission in three shapes: machine json (raw ratios), csv (raw,
// %.17g so values survive round trips), and human markdown (TTR and
// probabilities scaled x100).

namespace hfl {

enum class ReportFormat { json, csv, markdown };

inline ReportFormat parse_format(const std::string& s) {
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    fail("unknown report format '" + s + "' (json, csv, markdown)");
}

namespace detail {

// ratio-valued metrics that human-facing tables show x100
inline bool human_scale_x100(const std::string& name) {
    for (const char* prefix : {"ttr", "at1", "at3", "at5", "agreement", "over10"})
        if (name.rfind(prefix, 0) == 0) return true;
    return false;
}

inline std::string fmt_val(double v) {
    char buf[64];
    snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_human(double v) {
    char buf[64];
    snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

} // namespace detail

// ---- MetricsReport ----

inline std::string metrics_aggregates_csv(const MetricsReport& r) {
    std::string out = "name,value\n";
    for (const auto& [k, v] : r.aggregates)
        out += k + "," + detail::fmt_val(v) + "\n";
    return out;
}

inline std::string metrics_per_sequence_csv(const MetricsReport& r) {
    std::string out = "seq";
    size_t rows = 0;
    for (const auto& [k, v] : r.per_sequence) {
        out += "," + k;
        rows = std::max(rows, v.size());
    }
    out += '\n';
    for (size_t i = 0; i < rows; ++i) {
        out += std::to_string(i);
        for (const auto& [k, v] : r.per_sequence)
            out += "," + (i < v.size() ? detail::fmt_val(v[i]) : std::string());
        out += '\n';
    }
    return out;
}

// inverse of the two csv emitters, for round-trip checks and tooling
inline MetricsReport metrics_report_from_csv(const std::string& aggregates_csv,
                                             const std::string& per_sequence_csv) {
    MetricsReport r;
    auto lines = [](const std::string& text) {
        std::vector<std::string> out;
        size_t pos = 0;
        while (pos < text.size()) {
            size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) nl = text.size();
            if (nl > pos) out.push_back(text.substr(pos, nl - pos));
            pos = nl + 1;
        }
        return out;
    };
    auto fields = [](const std::string& line) {
        std::vector<std::string> out;
        size_t pos = 0;
        while (true) {
            size_t c = line.find(',', pos);
            if (c == std::string::npos) {
                out.push_back(line.substr(pos));
                break;
            }
            out.push_back(line.substr(pos, c - pos));
            pos = c + 1;
        }
        return out;
    };

    auto agg = lines(aggregates_csv);
    require(!agg.empty() && agg.front() == "name,value",
            "metrics csv: bad aggregates header");
    for (size_t i = 1; i < agg.size(); ++i) {
        auto f = fields(agg[i]);
        require(f.size() == 2, "metrics csv: bad aggregates row");
        r.aggregates[f[0]] = std::stod(f[1]);
    }

    auto per = lines(per_sequence_csv);
    require(!per.empty(), "metrics csv: empty per-sequence file");
    auto header = fields(per.front());
    require(!header.empty() && header.front() == "seq",
            "metrics csv: bad per-sequence header");
    for (size_t col = 1; col < header.size(); ++col) r.per_sequence[header[col]] = {};
    for (size_t i = 1; i < per.size(); ++i) {
        auto f = fields(per[i]);
        require(f.size() == header.size(), "metrics csv: ragged per-sequence row");
        for (size_t col = 1; col < header.size(); ++col)
            if (!f[col].empty()) r.per_sequence[header[col]].push_back(std::stod(f[col]));
    }
    return r;
}

inline std::string metrics_markdown(const MetricsReport& r) {
    std::string out = "| Metric | Value |\n|---|---|\n";
    for (const auto& [k, v] : r.aggregates) {
        double shown = detail::human_scale_x100(k) ? v * 100.0 : v;
        out += "| " + k + (detail::human_scale_x100(k) ? " (x100)" : "") + " | " +
               detail::fmt_human(shown) + " |\n";
    }
    return out;
}

// ---- RunReport ----

inline std::string run_report_csv(const RunReport& r) {
    std::string out = "name,value\n";
    for (const auto& [k, v] : r.metrics) out += k + "," + detail::fmt_val(v) + "\n";
    return out;
}

// sharpness runs render in the familiar table shape; other kinds fall back
// to a generic metric table
inline std::string run_report_markdown(const RunReport& r) {
    std::string out = "## " + r.kind + " run `" + r.spec_hash + "`\n\n";
    if (r.kind == "sharpness") {
        out += "| Model | Perplexity | Entropy | @1 | @3 | @5 |\n";
        out += "|---|---|---|---|---|---|\n";
        for (const char* label : {"base", "hyperfit"}) {
            auto get = [&](const std::string& key) {
                auto it = r.metrics.find(key + "." + label);
                require(it != r.metrics.end(), "run report: missing metric " + key);
                return it->second;
            };
            out += std::string("| ") + label + " | " + detail::fmt_human(get("perplexity")) +
                   " | " + detail::fmt_human(get("entropy")) + " | " +
                   detail::fmt_human(get("at1") * 100.0) + " | " +
                   detail::fmt_human(get("at3") * 100.0) + " | " +
                   detail::fmt_human(get("at5") * 100.0) + " |\n";
        }
        return out;
    }
    out += "| Metric | Value |\n|---|---|\n";
    for (const auto& [k, v] : r.metrics) {
        double shown = detail::human_scale_x100(k) ? v * 100.0 : v;
        out += "| " + k + (detail::human_scale_x100(k) ? " (x100)" : "") + " | " +
               detail::fmt_human(shown) + " |\n";
    }
    if (!r.warnings.empty()) {
        out += "\n";
        for (const auto& w : r.warnings) out += "- warning: " + w + "\n";
    }
    return out;
}

// ---- entry points ----

inline std::vector<std::filesystem::path> emit_report(const MetricsReport& r,
                                                      ReportFormat fmt,
                                                      const std::filesystem::path& dir) {
    require(!r.aggregates.empty() || !r.per_sequence.empty(), "emit_report: empty report");
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::filesystem::path& p, const std::string& text) {
        write_file(p, text);
        written.push_back(p);
    };
    switch (fmt) {
    case ReportFormat::json:
        emit(dir / "metrics.json", r.to_json().dump(2) + "\n");
        break;
    case ReportFormat::csv:
        emit(dir / "metrics_aggregates.csv", metrics_aggregates_csv(r));
        emit(dir / "metrics_per_sequence.csv", metrics_per_sequence_csv(r));
        break;
    case ReportFormat::markdown:
        emit(dir / "metrics.md", metrics_markdown(r));
        break;
    }
    return written;
}

inline std::vector<std::filesystem::path> emit_report(const RunReport& r,
                                                      ReportFormat fmt,
                                                      const std::filesystem::path& dir) {
    require(!r.metrics.empty(), "emit_report: empty report");
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::filesystem::path& p, const std::string& text) {
        write_file(p, text);
        written.push_back(p);
    };
    switch (fmt) {
    case ReportFormat::json:
        write_run_report(r, dir);
        written.push_back(dir / "report.json");
        written.push_back(dir / "report.meta.json");
        break;
    case ReportFormat::csv:
        emit(dir / "report.csv", run_report_csv(r));
        break;
    case ReportFormat::markdown:
        emit(dir / "report.md", run_report_markdown(r));
        break;
    }
    return written;
}

} // namespace hfl
