#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "disccal/domain.hpp"

namespace disccal {

/// Closed-form stand-in for the finite-element simulator.
///
///   g_c(p) = 0.5 + sum_j w_cj p_j + 0.5 p_c p_{c+5},  w_cj = (((7c + 3j) mod 11) + 1) / 22
///   rom    = (10 / g_c) (1 - exp(-m g_c / 4))
///
/// c in 1..4 and j in 1..13 are 1-based. The response is smooth in p,
/// strictly increasing in the moment and saturates at 10 / g_c degrees.
double oracle_rom(const ParamVector& normalized, LoadCase load_case, double moment);

/// g_c(p) from the formula above.
double oracle_stiffness(const ParamVector& normalized, LoadCase load_case);

/// Oracle RoM for every cell of a grid.
RomTable oracle_table(const ParamVector& normalized, const LoadGrid& grid);

struct DatasetRecord {
    std::int64_t config_id = 0;
    ParamVector config{};  ///< normalized
    LoadCase load_case = LoadCase::AxialRotation;
    double moment = 1.0;  ///< Nm
    double rom = 0.0;     ///< degrees

    bool operator==(const DatasetRecord&) const = default;
};

/// Simulator samples; every config covers the full grid, records ordered by
/// config then grid cell.
struct Dataset {
    std::vector<DatasetRecord> records;
    LoadGrid grid = LoadGrid::standard();
    MaterialBounds bounds = MaterialBounds::defaults();

    bool empty() const { return records.empty(); }
    std::size_t config_count() const { return records.empty() ? 0 : records.size() / grid.cell_count(); }

    /// Distinct config ids in record order.
    std::vector<std::int64_t> config_ids() const;

    /// Records whose config id is in `ids` (order preserved).
    Dataset subset(const std::vector<std::int64_t>& ids) const;

    bool operator==(const Dataset&) const = default;
};

/// LHS-samples n_configs configs and evaluates the oracle on every grid cell.
Dataset generate_dataset(std::size_t n_configs, const LoadGrid& grid, std::uint64_t seed);

/// Oracle records for the given normalized configs (ids 0..n-1).
Dataset dataset_from_configs(const std::vector<MaterialConfig>& configs, const LoadGrid& grid);

/// CSV header: config_id,load_case,moment,p1,...,p13,rom
std::string dataset_to_csv(const Dataset& dataset);
Dataset dataset_from_csv(std::string_view text);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

} // namespace disccal
