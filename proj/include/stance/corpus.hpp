#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stance/core.hpp"

namespace stance::corpus {

// Source-side label class. Neutral only survives until unify_labels.
enum class SourceClass : std::uint8_t { Favor, Against, None, Neutral };

std::optional<SourceClass> parse_source_class(std::string_view s);
std::string_view to_string(SourceClass c);

// Ordered, validated record collection. Immutable once built.
class Dataset {
 public:
  Dataset() = default;
  // Throws FormatError on duplicate ids or invalid records.
  Dataset(std::string name, std::vector<StanceRecord> records);
  Dataset(std::string name, std::vector<StanceRecord> records,
          std::vector<SourceClass> source_classes);

  const std::string& name() const { return name_; }
  const std::vector<StanceRecord>& records() const { return records_; }
  const StanceRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const std::vector<std::size_t>& split_indices(Split s) const {
    return splits_[static_cast<std::size_t>(s)];
  }
  SourceClass source_class(std::size_t i) const { return source_classes_[i]; }
  const std::vector<SourceClass>& source_classes() const { return source_classes_; }

  // Records of one split, as a new dataset with the same name.
  Dataset subset(Split s) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;

 private:
  std::string name_;
  std::vector<StanceRecord> records_;
  std::vector<SourceClass> source_classes_;
  std::array<std::vector<std::size_t>, 3> splits_;
};

Dataset concat(std::string name, const std::vector<const Dataset*>& parts);

enum class FileFormat { Csv, Tsv, Jsonl };
enum class Encoding { Utf8, Latin1 };

struct ColumnMap {
  std::optional<std::string> id;  // generated as <corpus>:<split>:<row> when absent
  std::string text;
  std::string target;
  std::string label;
  std::optional<std::string> domain;
};

struct CorpusAdapterConfig {
  std::string corpus_name;
  FileFormat format = FileFormat::Csv;
  Encoding encoding = Encoding::Utf8;
  // split -> paths relative to the source dir; several files per split are
  // concatenated in order
  std::map<Split, std::vector<std::string>> files;
  ColumnMap columns;
  std::map<std::string, SourceClass> label_map;  // source label string -> class
  std::string default_domain;
};

CorpusAdapterConfig adapter_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusAdapterConfig& cfg);
CorpusAdapterConfig load_adapter(const std::filesystem::path& path);

// Reads every split file named by the config under source_dir.
Dataset ingest(const std::filesystem::path& source_dir, const CorpusAdapterConfig& config);

// Collapses Neutral into None.
Dataset unify_labels(const Dataset& ds);

struct NoneExtensionOptions {
  double fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t max_draws_per_record = 100;
};

// Appends floor(fraction * |train split|) None records whose targets are
// drawn from other records and are not mentioned in the host text.
Dataset extend_none_subset(const Dataset& train, const NoneExtensionOptions& opts);

struct TargetStats {
  std::size_t count = 0;
  std::array<std::size_t, kNumLabels> labels{};
};

struct StatsReport {
  std::string name;
  std::array<std::size_t, 3> split_counts{};
  std::map<std::string, TargetStats> targets;
  std::size_t total = 0;
};

StatsReport stats(const Dataset& ds);
nlohmann::json to_json(const StatsReport& report);
// Plain-text table with Corpus / Targets / Train / Valid / Test columns.
std::string format_stats_table(const std::vector<StatsReport>& reports);

// Canonical JSONL I/O.
void write_jsonl(const Dataset& ds, const std::filesystem::path& path);
std::string to_jsonl(const Dataset& ds);
Dataset read_jsonl(const std::filesystem::path& path, std::string name = {});

// Delimited-text parsing, exposed for tests.
std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char delim,
                                                      bool quoted);
std::string latin1_to_utf8(std::string_view bytes);

}  // namespace stance::corpus
