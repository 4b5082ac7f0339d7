#pragma once

#include <map>
#include <string>

#include "mfgp/sim/market_sim.hpp"

namespace mfgp::io {

inline constexpr const char* kPanelHeader = "day,bin,asset,price,net_volume";

/// Shortest decimal text that parses back to exactly `x`; "nan"/"inf" for
/// non-finite values.
std::string format_double(double x);

/// Writes `content` to a temporary sibling file and renames it over `path`.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Panel as CSV plus JSON metadata. Row (day, 0, asset) holds the opening
/// price with net_volume 0; row (day, k, asset) for k >= 1 holds the price
/// at the end of bin k and the bin's net volume. `extra` entries are copied
/// into the metadata as strings.
void write_panel(const sim::MarketPanel& panel, const std::string& csv_path,
                 const std::string& meta_path,
                 const std::map<std::string, std::string>& extra = {});

/// Streaming ingest. Rows may come in any order; every (day, bin, asset)
/// cell must appear exactly once. Throws DataError with the 1-based line
/// number on malformed rows.
sim::MarketPanel read_panel(const std::string& csv_path,
                            const std::string& meta_path);

}  // namespace mfgp::io
