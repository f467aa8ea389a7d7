#include "disccal/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "disccal/errors.hpp"
#include "text_io.hpp"

namespace disccal {

std::string_view to_string(LoadCase c) {
    switch (c) {
        case LoadCase::AxialRotation: return "axial_rotation";
        case LoadCase::Extension: return "extension";
        case LoadCase::Flexion: return "flexion";
        case LoadCase::LateralBending: return "lateral_bending";
    }
    return "unknown";
}

LoadCase parse_load_case(std::string_view text) {
    std::string key;
    for (char ch : text) {
        if (ch == ' ' || ch == '-') ch = '_';
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    if (key == "1" || key == "axial_rotation") return LoadCase::AxialRotation;
    if (key == "2" || key == "extension") return LoadCase::Extension;
    if (key == "3" || key == "flexion") return LoadCase::Flexion;
    if (key == "4" || key == "lateral_bending") return LoadCase::LateralBending;
    throw Error("unknown load case '" + std::string(text) + "'");
}

MaterialBounds MaterialBounds::defaults() {
    MaterialBounds b;
    b.names = {"C10n", "C01n", "C10a", "k1",  "k2",     "kappa",  "k1c",
               "k2c",  "k1r",  "k2r",  "alpha", "alpha_c", "alpha_r"};
    b.lower = {0.03, 0.0075, 0.065, 1.0, 10.0, 0.0, -0.2, -0.2, -0.2, -0.2, 7.5, 0.0, 0.0};
    b.upper = {0.21, 0.0525, 0.455, 50.0, 200.0, 0.33, 0.0, 0.0, 0.0, 0.0, 52.5, 0.3, 0.2};
    return b;
}

void MaterialBounds::validate() const {
    for (std::size_t j = 0; j < kParamCount; ++j) {
        if (names[j].empty()) throw Error("bounds row " + std::to_string(j + 1) + " has no name");
        if (!(std::isfinite(lower[j]) && std::isfinite(upper[j]) && lower[j] < upper[j]))
            throw Error("bounds row '" + names[j] + "' needs finite min < max");
    }
}

MaterialBounds MaterialBounds::load(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    MaterialBounds b;
    std::size_t count = 0;
    auto put = [&](std::string name, double lo, double hi) {
        if (count >= kParamCount) throw Error(path.string() + ": more than 13 parameters");
        b.names[count] = std::move(name);
        b.lower[count] = lo;
        b.upper[count] = hi;
        ++count;
    };

    if (path.extension() == ".json") {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
            for (const auto& row : doc.at("parameters"))
                put(row.at("name").get<std::string>(), row.at("min").get<double>(), row.at("max").get<double>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ": " + e.what());
        }
    } else {
        try {
            const toml::table doc = toml::parse(text, path.string());
            const auto* rows = doc["parameters"].as_array();
            if (rows == nullptr) throw Error(path.string() + ": missing [[parameters]]");
            for (const auto& node : *rows) {
                const auto* row = node.as_table();
                if (row == nullptr) throw Error(path.string() + ": parameters entries must be tables");
                auto name = (*row)["name"].value<std::string>();
                auto lo = (*row)["min"].value<double>();
                auto hi = (*row)["max"].value<double>();
                if (!name || !lo || !hi) throw Error(path.string() + ": each parameter needs name, min, max");
                put(*name, *lo, *hi);
            }
        } catch (const toml::parse_error& e) {
            throw Error(path.string() + ": " + std::string(e.description()));
        }
    }
    if (count != kParamCount)
        throw Error(path.string() + ": expected 13 parameters, got " + std::to_string(count));
    b.validate();
    return b;
}

MaterialConfig normalize(const MaterialConfig& config, const MaterialBounds& bounds) {
    if (config.space != Space::Physical) throw Error("normalize expects a physical config");
    MaterialConfig out{{}, Space::Normalized};
    for (std::size_t j = 0; j < kParamCount; ++j) {
        const double v = config.values[j];
        if (!(v >= bounds.lower[j] && v <= bounds.upper[j])) throw BoundsViolation(j, v);
        out.values[j] = (v - bounds.lower[j]) / (bounds.upper[j] - bounds.lower[j]);
    }
    return out;
}

DenormalizeResult denormalize(const MaterialConfig& config, const MaterialBounds& bounds) {
    if (config.space != Space::Normalized) throw Error("denormalize expects a normalized config");
    DenormalizeResult out{{{}, Space::Physical}, false};
    for (std::size_t j = 0; j < kParamCount; ++j) {
        const double v = config.values[j];
        if (v < 0.0 || v > 1.0) out.out_of_range = true;
        out.config.values[j] = bounds.lower[j] + v * (bounds.upper[j] - bounds.lower[j]);
    }
    return out;
}

LoadGrid::LoadGrid(std::vector<LoadCase> load_cases, std::vector<double> moments)
    : load_cases_(std::move(load_cases)), moments_(std::move(moments)) {
    if (load_cases_.empty() || moments_.empty()) throw Error("load grid needs at least one load case and moment");
    std::set<LoadCase> seen(load_cases_.begin(), load_cases_.end());
    if (seen.size() != load_cases_.size()) throw Error("load grid has duplicate load cases");
    for (std::size_t i = 0; i < moments_.size(); ++i) {
        if (!(std::isfinite(moments_[i]) && moments_[i] > 0.0)) throw Error("moments must be finite and > 0");
        if (i > 0 && !(moments_[i] > moments_[i - 1])) throw Error("moments must be strictly increasing");
    }
}

LoadGrid LoadGrid::standard() {
    return LoadGrid({kAllLoadCases.begin(), kAllLoadCases.end()}, {1.0, 2.0, 3.0, 4.0, 5.0});
}

RomTable::RomTable(LoadGrid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.cell_count())
        throw ShapeError("RoM table has " + std::to_string(values.size()) + " values for " +
                         std::to_string(grid.cell_count()) + " grid cells");
    for (double x : values)
        if (!std::isfinite(x)) throw Error("RoM table contains a non-finite value");
}

RomTable RomTable::parse_csv(std::string_view text) {
    const auto lines = detail::lines_of(text);
    if (lines.empty()) throw ParseError(1, "missing header");
    const auto header = detail::split(lines[0]);
    if (header.size() != 3 || header[0] != "load_case" || header[1] != "moment" || header[2] != "rom")
        throw ParseError(1, "expected header 'load_case,moment,rom'");

    std::map<std::pair<LoadCase, double>, double> cells;
    std::vector<LoadCase> cases;
    std::set<double> moments;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (detail::trim(lines[i]).empty()) continue;
        const auto f = detail::split(lines[i]);
        if (f.size() != 3) throw ParseError(line_no, "expected 3 fields, got " + std::to_string(f.size()));
        LoadCase c;
        try {
            c = parse_load_case(f[0]);
        } catch (const Error& e) {
            throw ParseError(line_no, e.what());
        }
        const double m = detail::parse_double(f[1], line_no);
        const double rom = detail::parse_double(f[2], line_no);
        if (!(m > 0.0)) throw ParseError(line_no, "moment must be > 0");
        if (!cells.emplace(std::pair{c, m}, rom).second) throw ParseError(line_no, "duplicate cell");
        if (std::find(cases.begin(), cases.end(), c) == cases.end()) cases.push_back(c);
        moments.insert(m);
    }
    if (cells.empty()) throw ParseError(lines.size(), "no data rows");
    std::sort(cases.begin(), cases.end());
    LoadGrid grid(cases, {moments.begin(), moments.end()});
    std::vector<double> values;
    values.reserve(grid.cell_count());
    for (LoadCase c : grid.load_cases())
        for (double m : grid.moments()) {
            auto it = cells.find({c, m});
            if (it == cells.end())
                throw ParseError(lines.size(), "missing cell " + std::string(to_string(c)) + " @ " +
                                                   detail::format_double(m) + " Nm");
            values.push_back(it->second);
        }
    return RomTable(std::move(grid), std::move(values));
}

RomTable RomTable::load_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(detail::read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string(), e);
    }
}

std::string RomTable::to_csv() const {
    std::string out = "load_case,moment,rom\n";
    for (std::size_t cell = 0; cell < values.size(); ++cell) {
        out += to_string(grid.cell_load_case(cell));
        out += ',';
        out += detail::format_double(grid.cell_moment(cell));
        out += ',';
        out += detail::format_double(values[cell]);
        out += '\n';
    }
    return out;
}

void RomTable::save_csv(const std::filesystem::path& path) const { detail::write_file(path, to_csv()); }

Normalizer Normalizer::for_rom_range(double rom_min, double rom_max) {
    Normalizer n;
    n.input_low[0] = 1.0;
    n.input_high[0] = 4.0;
    n.input_low[1] = 1.0;
    n.input_high[1] = 5.0;
    for (std::size_t j = kConditionCount; j < kInputDim; ++j) {
        n.input_low[j] = 0.0;
        n.input_high[j] = 1.0;
    }
    n.output_low = rom_min;
    // A constant training target still needs an invertible map.
    n.output_high = rom_max > rom_min ? rom_max : rom_min + 1.0;
    return n;
}

} // namespace disccal
