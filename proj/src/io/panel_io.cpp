#include "mfgp/io/panel_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "mfgp/errors.hpp"

namespace mfgp::io {

using nlohmann::json;

namespace {

double parse_double(std::string_view s, std::size_t line, const char* field) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty())
    throw DataError(std::string("panel: non-numeric ") + field + " '" +
                        std::string(s) + "'",
                    line);
  return v;
}

std::size_t parse_index(std::string_view s, std::size_t line, const char* field) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty())
    throw DataError(std::string("panel: invalid ") + field + " '" +
                        std::string(s) + "'",
                    line);
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename onto " + target.string() + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_panel(const sim::MarketPanel& panel, const std::string& csv_path,
                 const std::string& meta_path,
                 const std::map<std::string, std::string>& extra) {
  std::string csv = std::string(kPanelHeader) + "\n";
  csv.reserve(panel.n_days() * (panel.n_bins() + 1) * panel.d() * 40);
  const auto& names = panel.asset_names();
  for (std::size_t l = 0; l < panel.n_days(); ++l)
    for (std::size_t k = 0; k <= panel.n_bins(); ++k)
      for (std::size_t i = 0; i < panel.d(); ++i) {
        csv += std::to_string(l);
        csv += ',';
        csv += std::to_string(k);
        csv += ',';
        csv += names[i];
        csv += ',';
        csv += format_double(panel.price(l, k, i));
        csv += ',';
        if (panel.has_flows()) csv += k == 0 ? "0" : format_double(panel.flow(l, k - 1, i));
        csv += '\n';
      }

  json meta;
  meta["format"] = "mfgp-panel";
  meta["version"] = 1;
  meta["n_days"] = panel.n_days();
  meta["n_bins"] = panel.n_bins();
  meta["assets"] = names;
  meta["bin_times_day"] = panel.bin_times();
  meta["has_flows"] = panel.has_flows();
  meta["units"] = {{"time", "day"}, {"price", "usd_per_share"}, {"net_volume", "shares"}};
  for (const auto& [k, v] : extra) meta[k] = v;
  atomic_write(csv_path, csv);
  atomic_write(meta_path, meta.dump(2) + "\n");
}

sim::MarketPanel read_panel(const std::string& csv_path,
                            const std::string& meta_path) {
  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::exception& e) {
    throw DataError("panel metadata: " + std::string(e.what()));
  }
  std::vector<std::string> assets;
  std::vector<double> times;
  std::size_t n_days = 0;
  bool has_flows = true;
  try {
    assets = meta.at("assets").get<std::vector<std::string>>();
    times = meta.at("bin_times_day").get<std::vector<double>>();
    n_days = meta.at("n_days").get<std::size_t>();
    if (meta.contains("has_flows")) has_flows = meta["has_flows"].get<bool>();
  } catch (const json::exception& e) {
    throw DataError("panel metadata: " + std::string(e.what()));
  }
  if (times.size() < 2) throw DataError("panel metadata: need at least one bin");
  if (assets.empty()) throw DataError("panel metadata: empty asset list");
  const std::size_t M = times.size() - 1, d = assets.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < d; ++i)
    if (!index.emplace(assets[i], i).second)
      throw DataError("panel metadata: duplicate asset name " + assets[i]);

  sim::MarketPanel panel(n_days, M, d, times, has_flows);
  panel.asset_names() = assets;
  std::vector<bool> seen(n_days * (M + 1) * d, false);

  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open " + csv_path);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw DataError("panel: empty file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPanelHeader)
    throw DataError("panel: header must be exactly '" + std::string(kPanelHeader) + "'", 1);

  std::string_view f[5];
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t nf = 0, start = 0;
    for (std::size_t p = 0; p <= line.size(); ++p)
      if (p == line.size() || line[p] == ',') {
        if (nf == 5) throw DataError("panel: too many fields", lineno);
        f[nf++] = std::string_view(line).substr(start, p - start);
        start = p + 1;
      }
    if (nf != 5) throw DataError("panel: expected 5 fields", lineno);
    const std::size_t l = parse_index(f[0], lineno, "day");
    const std::size_t k = parse_index(f[1], lineno, "bin");
    const auto it = index.find(std::string(f[2]));
    if (it == index.end())
      throw DataError("panel: unknown asset '" + std::string(f[2]) + "'", lineno);
    if (l >= n_days) throw DataError("panel: day index beyond metadata n_days", lineno);
    if (k > M) throw DataError("panel: bin index beyond metadata bins", lineno);
    const std::size_t i = it->second;
    const std::size_t cell = (l * (M + 1) + k) * d + i;
    if (seen[cell]) throw DataError("panel: duplicate (day, bin, asset) row", lineno);
    seen[cell] = true;
    const double price = parse_double(f[3], lineno, "price");
    if (!std::isfinite(price)) throw DataError("panel: non-finite price", lineno);
    panel.price(l, k, i) = price;
    if (has_flows) {
      const double nu = parse_double(f[4], lineno, "net_volume");
      if (!std::isfinite(nu)) throw DataError("panel: non-finite net_volume", lineno);
      if (k == 0) {
        if (nu != 0.0) throw DataError("panel: opening row must have net_volume 0", lineno);
      } else {
        panel.flow(l, k - 1, i) = nu;
      }
    } else if (!f[4].empty()) {
      parse_double(f[4], lineno, "net_volume");
    }
  }
  for (std::size_t l = 0; l < n_days; ++l)
    for (std::size_t c = 0; c < (M + 1) * d; ++c)
      if (!seen[l * (M + 1) * d + c]) {
        std::ostringstream os;
        os << "panel: ragged day " << l << " (missing bin " << c / d << ", asset "
           << assets[c % d] << ")";
        throw DataError(os.str());
      }
  panel.validate();
  return panel;
}

}  // namespace mfgp::io
