#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace disccal {

/// Number of calibrated material parameters.
inline constexpr std::size_t kParamCount = 13;
/// Leading condition columns of a network input row: load case, moment.
inline constexpr std::size_t kConditionCount = 2;
/// Width of one surrogate input row [c, m, p1..p13].
inline constexpr std::size_t kInputDim = kConditionCount + kParamCount;

using ParamVector = std::array<double, kParamCount>;

enum class LoadCase { AxialRotation = 1, Extension = 2, Flexion = 3, LateralBending = 4 };

inline constexpr std::array<LoadCase, 4> kAllLoadCases = {
    LoadCase::AxialRotation, LoadCase::Extension, LoadCase::Flexion, LoadCase::LateralBending};

/// 1-based code used by the oracle and the network encoding.
inline int load_case_code(LoadCase c) { return static_cast<int>(c); }

/// snake_case name, e.g. "lateral_bending".
std::string_view to_string(LoadCase c);

/// Accepts snake_case names, display names ("Axial Rotation") and codes 1..4.
/// Throws Error on anything else.
LoadCase parse_load_case(std::string_view text);

/// Box bounds of the physical parameter space.
struct MaterialBounds {
    std::array<std::string, kParamCount> names;
    ParamVector lower{};
    ParamVector upper{};

    /// Material parameter ranges of the disc model (C10n ... alpha_r).
    static MaterialBounds defaults();

    /// Reads a bounds table from TOML or JSON (chosen by file extension).
    /// Both formats hold a `parameters` array of {name, min, max} entries.
    static MaterialBounds load(const std::filesystem::path& path);

    /// Throws Error unless every row has lower < upper and a name.
    void validate() const;

    bool operator==(const MaterialBounds&) const = default;
};

enum class Space { Physical, Normalized };

struct MaterialConfig {
    ParamVector values{};
    Space space = Space::Normalized;

    bool operator==(const MaterialConfig&) const = default;
};

/// Min-max maps a physical config to [0,1]^13. Throws BoundsViolation on the
/// first out-of-range parameter.
MaterialConfig normalize(const MaterialConfig& config, const MaterialBounds& bounds);

struct DenormalizeResult {
    MaterialConfig config;
    /// True when some normalized input was outside [0,1]; the affine map is
    /// still applied.
    bool out_of_range = false;
};

DenormalizeResult denormalize(const MaterialConfig& config, const MaterialBounds& bounds);

/// Ordered (load case x moment) evaluation grid.
class LoadGrid {
public:
    LoadGrid(std::vector<LoadCase> load_cases, std::vector<double> moments);

    /// All four load cases at 1..5 Nm (20 cells).
    static LoadGrid standard();

    const std::vector<LoadCase>& load_cases() const { return load_cases_; }
    const std::vector<double>& moments() const { return moments_; }
    std::size_t cell_count() const { return load_cases_.size() * moments_.size(); }

    /// Cells are row-major: load case outer, moment inner.
    std::size_t cell_index(std::size_t case_pos, std::size_t moment_pos) const {
        return case_pos * moments_.size() + moment_pos;
    }
    LoadCase cell_load_case(std::size_t cell) const { return load_cases_[cell / moments_.size()]; }
    double cell_moment(std::size_t cell) const { return moments_[cell % moments_.size()]; }

    bool operator==(const LoadGrid&) const = default;

private:
    std::vector<LoadCase> load_cases_;
    std::vector<double> moments_;
};

/// RoM values (degrees) on a grid, row-major by load case then moment.
struct RomTable {
    LoadGrid grid;
    std::vector<double> values;

    /// Validates the size and finiteness of values.
    RomTable(LoadGrid grid, std::vector<double> values);

    double at(std::size_t case_pos, std::size_t moment_pos) const {
        return values[grid.cell_index(case_pos, moment_pos)];
    }

    /// CSV with header `load_case,moment,rom`. Rows may come in any order but
    /// must form a complete grid.
    static RomTable load_csv(const std::filesystem::path& path);
    static RomTable parse_csv(std::string_view text);
    std::string to_csv() const;
    void save_csv(const std::filesystem::path& path) const;

    bool operator==(const RomTable&) const = default;
};

/// Affine min-max scaling of network inputs [c, m, p1..p13] and the RoM output.
struct Normalizer {
    std::array<double, kInputDim> input_low{};
    std::array<double, kInputDim> input_high{};
    double output_low = 0.0;
    double output_high = 1.0;

    /// Load case over [1,4], moment over [1,5] Nm, parameters already in
    /// [0,1]; output range fitted from observed RoM values.
    static Normalizer for_rom_range(double rom_min, double rom_max);

    double input(std::size_t column, double raw) const {
        return (raw - input_low[column]) / (input_high[column] - input_low[column]);
    }
    double input_inverse(std::size_t column, double scaled) const {
        return input_low[column] + scaled * (input_high[column] - input_low[column]);
    }
    double output(double rom_deg) const { return (rom_deg - output_low) / (output_high - output_low); }
    double output_inverse(double scaled) const { return output_low + scaled * (output_high - output_low); }
    /// d(degrees)/d(normalized output).
    double output_scale() const { return output_high - output_low; }

    /// Scaled condition columns for one grid cell.
    std::array<double, kConditionCount> condition(LoadCase c, double moment) const {
        return {input(0, load_case_code(c)), input(1, moment)};
    }

    bool operator==(const Normalizer&) const = default;
};

} // namespace disccal
