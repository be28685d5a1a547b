#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcshape/datagen.hpp"
#include "rcshape/testing.hpp"

namespace rcshape {

std::string format_double(double v);  // round-trip safe
std::uint64_t fnv64(std::string_view bytes);
std::string hash_hex(std::string_view bytes);

// Dataset CSV: header x1,...,xd,y and optional beta1,...,betad.
void save_dataset_csv(const std::string& path, const RawDataset& raw);
RawDataset load_dataset_csv(const std::string& path, bool intercept);

void save_kernel_csv(const std::string& path, const KernelTable& kt);
void save_arrows_csv(const std::string& path, const std::vector<Arrow>& arrows);

nlohmann::json outcome_to_json(const TestOutcome& outcome, std::uint64_t seed,
                               const std::string& config_hash);
nlohmann::json ols_to_json(const OlsResult& ols);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

void write_manifest(const std::string& results_path,
                    const std::string& config_hash, std::uint64_t seed,
                    double wall_seconds, const std::string& command);

// JSON-file cache of quantile computations keyed by content hashes.
class QuantileCache {
 public:
  explicit QuantileCache(std::string path);
  std::optional<nlohmann::json> lookup(const std::string& key) const;
  void store(const std::string& key, nlohmann::json value);

 private:
  std::string path_;
  nlohmann::json map_;
};

std::string family_hash(const std::vector<TestPoint>& family);
std::string file_content_hash(const std::string& path);

}  // namespace rcshape
