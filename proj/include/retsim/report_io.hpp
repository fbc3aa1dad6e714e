#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "retsim/sim_engine.hpp"

namespace retsim {

namespace detail_report {

inline std::string rate4(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace detail_report

// report.csv: round, pcr, then per ranker {name}_ecr, {name}_ccr, {name}_p10,
// {name}_aa, {name}_ndcg5. Fixed order, 4 decimal places.
inline std::string report_csv(const RunReport& report) {
    std::ostringstream out;
    out << "round,pcr";
    for (const std::string& r : report.manifest.rankers)
        out << "," << r << "_ecr," << r << "_ccr," << r << "_p10," << r << "_aa,"
            << r << "_ndcg5";
    out << "\n";
    for (const auto& row : report.rows) {
        out << row.round << "," << detail_report::rate4(row.pcr);
        for (const auto& [_, m] : row.per_ranker)
            out << "," << detail_report::rate4(m.ecr) << ","
                << detail_report::rate4(m.ccr) << "," << detail_report::rate4(m.p10)
                << "," << detail_report::rate4(m.aa) << ","
                << detail_report::rate4(m.ndcg5);
        out << "\n";
    }
    return out.str();
}

inline nlohmann::json report_json(const RunReport& report) {
    nlohmann::json j;
    nlohmann::json manifest;
    manifest["created_utc"] = report.manifest.created_utc;
    manifest["version"] = report.manifest.version;
    manifest["seed"] = report.manifest.seed;
    manifest["scenario"] = report.manifest.scenario;
    manifest["rounds"] = report.manifest.rounds;
    manifest["n_original_per_query"] = report.manifest.n_original_per_query;
    manifest["cutoff"] = report.manifest.cutoff;
    manifest["averaging"] = report.manifest.averaging;
    manifest["corpus_hashes"] = report.manifest.corpus_hashes;
    manifest["rankers"] = report.manifest.rankers;
    manifest["config"] = report.manifest.config_echo;
    if (!report.manifest.error.empty()) manifest["error"] = report.manifest.error;
    j["manifest"] = manifest;

    nlohmann::json pool;
    pool["original_micro_correct_rate"] = report.pool_report.original_micro_correct_rate;
    pool["synthetic_micro_correct_rate"] =
        report.pool_report.synthetic_micro_correct_rate;
    pool["queries"] = report.pool_report.queries;
    pool["original_docs"] = report.pool_report.original_docs;
    pool["synthetic_docs"] = report.pool_report.synthetic_docs;
    j["pool_report"] = pool;

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json r;
        r["round"] = row.round;
        r["pcr"] = row.pcr;
        nlohmann::json rankers;
        for (const auto& [name, m] : row.per_ranker) {
            nlohmann::json rm;
            rm["ecr"] = m.ecr;
            rm["ccr"] = m.ccr;
            rm["p10"] = m.p10;
            rm["aa"] = m.aa;
            rm["ndcg5"] = m.ndcg5;
            if (m.ccr_undefined) rm["ccr_undefined"] = true;
            if (m.ndcg_all_excluded) rm["ndcg_all_excluded"] = true;
            rankers[name] = rm;
        }
        r["rankers"] = rankers;
        rows.push_back(r);
    }
    j["rows"] = rows;
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << data;
}

inline void write_report_files(const RunReport& report,
                               const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "report.csv", report_csv(report));
    write_text_file(out_dir / "report.json", report_json(report).dump(2) + "\n");
}

// Parsed report.csv, as written by the simulator.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }
    std::vector<double> column(const std::string& name) const {
        int idx = column_index(name);
        if (idx < 0)
            throw validation_error("unknown report column \"" + name + "\"");
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& row : rows) out.push_back(row[static_cast<std::size_t>(idx)]);
        return out;
    }
};

inline CsvTable read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open report: " + path.string());
    CsvTable table;
    std::string line;
    if (!std::getline(in, line))
        throw validation_error("report has no header: " + path.string());
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) table.columns.push_back(cell);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream row_in(line);
        std::vector<double> row;
        while (std::getline(row_in, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw validation_error(path.string() + " line " +
                                       std::to_string(lineno) +
                                       ": non-numeric cell \"" + cell + "\"");
            }
        }
        if (row.size() != table.columns.size())
            throw validation_error(path.string() + " line " + std::to_string(lineno) +
                                   ": expected " + std::to_string(table.columns.size()) +
                                   " cells, got " + std::to_string(row.size()));
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace retsim
