#include "disccal/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "disccal/errors.hpp"
#include "disccal/parallel.hpp"
#include "disccal/sampling.hpp"
#include "text_io.hpp"

namespace disccal {

double oracle_stiffness(const ParamVector& p, LoadCase load_case) {
    const int c = load_case_code(load_case);
    double g = 0.5;
    for (int j = 1; j <= static_cast<int>(kParamCount); ++j) {
        const double w = static_cast<double>(((7 * c + 3 * j) % 11) + 1) / 22.0;
        g += w * p[static_cast<std::size_t>(j - 1)];
    }
    g += 0.5 * p[static_cast<std::size_t>(c - 1)] * p[static_cast<std::size_t>(c + 4)];
    return g;
}

double oracle_rom(const ParamVector& p, LoadCase load_case, double moment) {
    const double g = oracle_stiffness(p, load_case);
    return (10.0 / g) * -std::expm1(-moment * g / 4.0);
}

RomTable oracle_table(const ParamVector& p, const LoadGrid& grid) {
    std::vector<double> values(grid.cell_count());
    for (std::size_t cell = 0; cell < values.size(); ++cell)
        values[cell] = oracle_rom(p, grid.cell_load_case(cell), grid.cell_moment(cell));
    return RomTable(grid, std::move(values));
}

std::vector<std::int64_t> Dataset::config_ids() const {
    std::vector<std::int64_t> ids;
    for (const auto& r : records)
        if (ids.empty() || ids.back() != r.config_id) ids.push_back(r.config_id);
    return ids;
}

Dataset Dataset::subset(const std::vector<std::int64_t>& ids) const {
    const std::unordered_set<std::int64_t> keep(ids.begin(), ids.end());
    Dataset out{{}, grid, bounds};
    for (const auto& r : records)
        if (keep.contains(r.config_id)) out.records.push_back(r);
    return out;
}

Dataset dataset_from_configs(const std::vector<MaterialConfig>& configs, const LoadGrid& grid) {
    const std::size_t k = grid.cell_count();
    Dataset ds{std::vector<DatasetRecord>(configs.size() * k), grid, MaterialBounds::defaults()};
    parallel_for(configs.size(), [&](std::size_t i) {
        for (std::size_t cell = 0; cell < k; ++cell) {
            auto& r = ds.records[i * k + cell];
            r.config_id = static_cast<std::int64_t>(i);
            r.config = configs[i].values;
            r.load_case = grid.cell_load_case(cell);
            r.moment = grid.cell_moment(cell);
            r.rom = oracle_rom(r.config, r.load_case, r.moment);
        }
    });
    return ds;
}

Dataset generate_dataset(std::size_t n_configs, const LoadGrid& grid, std::uint64_t seed) {
    if (n_configs == 0) throw Error("generate_dataset needs n_configs >= 1");
    return dataset_from_configs(lhs_sample(n_configs, seed), grid);
}

namespace {

constexpr std::string_view kHeaderPrefix = "config_id,load_case,moment";

std::string dataset_header() {
    std::string h(kHeaderPrefix);
    for (std::size_t j = 1; j <= kParamCount; ++j) h += ",p" + std::to_string(j);
    h += ",rom\n";
    return h;
}

} // namespace

std::string dataset_to_csv(const Dataset& dataset) {
    std::string out = dataset_header();
    out.reserve(out.size() + dataset.records.size() * 300);
    for (const auto& r : dataset.records) {
        out += std::to_string(r.config_id);
        out += ',';
        out += to_string(r.load_case);
        out += ',';
        out += detail::format_double(r.moment);
        for (double v : r.config) {
            out += ',';
            out += detail::format_double(v);
        }
        out += ',';
        out += detail::format_double(r.rom);
        out += '\n';
    }
    return out;
}

Dataset dataset_from_csv(std::string_view text) {
    const auto lines = detail::lines_of(text);
    if (lines.empty() || std::string(detail::trim(lines[0])) + "\n" != dataset_header())
        throw ParseError(1, "expected header '" + std::string(kHeaderPrefix) + ",p1..p13,rom'");

    std::vector<DatasetRecord> records;
    records.reserve(lines.size());
    std::vector<std::size_t> record_lines;
    constexpr std::size_t kFields = 3 + kParamCount + 1;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (detail::trim(lines[i]).empty()) continue;
        const auto f = detail::split(lines[i]);
        if (f.size() != kFields)
            throw ParseError(line_no, "expected " + std::to_string(kFields) + " fields, got " + std::to_string(f.size()));
        DatasetRecord r;
        r.config_id = detail::parse_int(f[0], line_no);
        try {
            r.load_case = parse_load_case(f[1]);
        } catch (const Error& e) {
            throw ParseError(line_no, e.what());
        }
        r.moment = detail::parse_double(f[2], line_no);
        if (!(r.moment > 0.0)) throw ParseError(line_no, "moment must be > 0");
        for (std::size_t j = 0; j < kParamCount; ++j) {
            const double v = detail::parse_double(f[3 + j], line_no);
            if (v < 0.0 || v > 1.0) throw BoundsViolation(j, v);
            r.config[j] = v;
        }
        r.rom = detail::parse_double(f[kFields - 1], line_no);
        if (r.rom < 0.0) throw ParseError(line_no, "rom must be >= 0");
        records.push_back(r);
        record_lines.push_back(line_no);
    }

    Dataset ds;
    if (records.empty()) return ds;

    std::set<LoadCase> cases;
    std::set<double> moments;
    for (const auto& r : records) {
        cases.insert(r.load_case);
        moments.insert(r.moment);
    }
    ds.grid = LoadGrid({cases.begin(), cases.end()}, {moments.begin(), moments.end()});
    const std::size_t k = ds.grid.cell_count();

    // Group by config id, then place each record at its grid cell.
    std::map<std::int64_t, std::vector<const DatasetRecord*>> by_config;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        auto [it, inserted] = by_config.try_emplace(r.config_id, k, nullptr);
        const auto cpos = static_cast<std::size_t>(
            std::find(ds.grid.load_cases().begin(), ds.grid.load_cases().end(), r.load_case) -
            ds.grid.load_cases().begin());
        const auto mpos = static_cast<std::size_t>(
            std::lower_bound(ds.grid.moments().begin(), ds.grid.moments().end(), r.moment) -
            ds.grid.moments().begin());
        auto& slot = it->second[ds.grid.cell_index(cpos, mpos)];
        if (slot != nullptr) throw ParseError(record_lines[i], "duplicate grid cell for config " + std::to_string(r.config_id));
        if (!inserted) {
            for (const auto* other : it->second)
                if (other != nullptr && other->config != r.config)
                    throw ParseError(record_lines[i], "parameters differ within config " + std::to_string(r.config_id));
        }
        slot = &r;
    }
    ds.records.reserve(records.size());
    for (const auto& [id, cells] : by_config) {
        for (const auto* r : cells)
            if (r == nullptr) throw IncompleteConfig(id);
        for (const auto* r : cells) ds.records.push_back(*r);
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    detail::write_file(path, dataset_to_csv(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DatasetMissing(path.string());
    try {
        return dataset_from_csv(detail::read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string(), e);
    }
}

} // namespace disccal
