#include "stance/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "stance/rng.hpp"
#include "stance/text.hpp"

namespace stance::corpus {

namespace fs = std::filesystem;

std::optional<SourceClass> parse_source_class(std::string_view s) {
  const auto up = text::to_lower_ascii(s);
  if (up == "favor") return SourceClass::Favor;
  if (up == "against") return SourceClass::Against;
  if (up == "none") return SourceClass::None;
  if (up == "neutral") return SourceClass::Neutral;
  return std::nullopt;
}

std::string_view to_string(SourceClass c) {
  switch (c) {
    case SourceClass::Favor: return "FAVOR";
    case SourceClass::Against: return "AGAINST";
    case SourceClass::None: return "NONE";
    case SourceClass::Neutral: return "NEUTRAL";
  }
  return "NONE";
}

namespace {

StanceLabel to_label(SourceClass c) {
  switch (c) {
    case SourceClass::Favor: return StanceLabel::Favor;
    case SourceClass::Against: return StanceLabel::Against;
    default: return StanceLabel::None;
  }
}

SourceClass to_source(StanceLabel l) {
  switch (l) {
    case StanceLabel::Favor: return SourceClass::Favor;
    case StanceLabel::Against: return SourceClass::Against;
    case StanceLabel::None: return SourceClass::None;
  }
  return SourceClass::None;
}

std::vector<SourceClass> classes_of(const std::vector<StanceRecord>& records) {
  std::vector<SourceClass> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_source(r.label));
  return out;
}

}  // namespace

Dataset::Dataset(std::string name, std::vector<StanceRecord> records)
    : Dataset(std::move(name), records, classes_of(records)) {}

Dataset::Dataset(std::string name, std::vector<StanceRecord> records,
                 std::vector<SourceClass> source_classes)
    : name_(std::move(name)),
      records_(std::move(records)),
      source_classes_(std::move(source_classes)) {
  if (source_classes_.size() != records_.size())
    throw Error(ErrorCode::LengthMismatch, "source class list does not match record count");
  std::unordered_set<std::string> ids;
  ids.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    auto problems = validate_record(r);
    if (!problems.empty())
      throw Error(ErrorCode::FormatError, "record " + std::to_string(i) + " ('" + r.id +
                                              "'): " + problems.front());
    if (to_label(source_classes_[i]) != r.label)
      throw Error(ErrorCode::FormatError, "record '" + r.id + "' label disagrees with source class");
    if (!ids.insert(r.id).second)
      throw Error(ErrorCode::FormatError, "duplicate record id '" + r.id + "'");
    splits_[static_cast<std::size_t>(r.split)].push_back(i);
  }
}

Dataset Dataset::subset(Split s) const { return subset(split_indices(s)); }

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<StanceRecord> recs;
  std::vector<SourceClass> classes;
  recs.reserve(indices.size());
  for (auto i : indices) {
    recs.push_back(records_.at(i));
    classes.push_back(source_classes_.at(i));
  }
  return Dataset(name_, std::move(recs), std::move(classes));
}

Dataset concat(std::string name, const std::vector<const Dataset*>& parts) {
  std::vector<StanceRecord> recs;
  std::vector<SourceClass> classes;
  for (const auto* p : parts) {
    recs.insert(recs.end(), p->records().begin(), p->records().end());
    classes.insert(classes.end(), p->source_classes().begin(), p->source_classes().end());
  }
  return Dataset(std::move(name), std::move(recs), std::move(classes));
}

// --- adapter config ---------------------------------------------------------

CorpusAdapterConfig adapter_from_json(const nlohmann::json& j) {
  auto need = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
    auto it = obj.find(key);
    if (it == obj.end())
      throw Error(ErrorCode::ConfigError, std::string("adapter config missing '") + key + "'");
    return *it;
  };
  CorpusAdapterConfig cfg;
  cfg.corpus_name = need(j, "corpus_name").get<std::string>();
  const auto fmt = j.value("format", std::string("csv"));
  if (fmt == "csv") cfg.format = FileFormat::Csv;
  else if (fmt == "tsv") cfg.format = FileFormat::Tsv;
  else if (fmt == "jsonl") cfg.format = FileFormat::Jsonl;
  else throw Error(ErrorCode::ConfigError, "unknown format '" + fmt + "'");
  const auto enc = text::to_lower_ascii(j.value("encoding", std::string("utf-8")));
  if (enc == "utf-8" || enc == "utf8") cfg.encoding = Encoding::Utf8;
  else if (enc == "latin-1" || enc == "latin1" || enc == "iso-8859-1") cfg.encoding = Encoding::Latin1;
  else throw Error(ErrorCode::ConfigError, "unsupported encoding '" + enc + "'");

  for (const auto& [k, v] : need(j, "files").items()) {
    auto s = parse_split(k);
    if (!s) throw Error(ErrorCode::ConfigError, "unknown split '" + k + "' in files");
    if (v.is_array()) cfg.files[*s] = v.get<std::vector<std::string>>();
    else cfg.files[*s] = {v.get<std::string>()};
  }
  const auto& cols = need(j, "columns");
  if (cols.contains("id") && !cols["id"].is_null()) cfg.columns.id = cols["id"].get<std::string>();
  cfg.columns.text = need(cols, "text").get<std::string>();
  cfg.columns.target = need(cols, "target").get<std::string>();
  cfg.columns.label = need(cols, "label").get<std::string>();
  if (cols.contains("domain") && !cols["domain"].is_null())
    cfg.columns.domain = cols["domain"].get<std::string>();

  for (const auto& [k, v] : need(j, "label_map").items()) {
    auto c = parse_source_class(v.get<std::string>());
    if (!c)
      throw Error(ErrorCode::ConfigError, "label_map target '" + v.get<std::string>() +
                                              "' is not FAVOR/AGAINST/NONE/NEUTRAL");
    cfg.label_map[k] = *c;
  }
  cfg.default_domain = j.value("domain", std::string{});
  return cfg;
}

nlohmann::json to_json(const CorpusAdapterConfig& cfg) {
  nlohmann::json j;
  j["corpus_name"] = cfg.corpus_name;
  j["format"] = cfg.format == FileFormat::Csv ? "csv" : cfg.format == FileFormat::Tsv ? "tsv" : "jsonl";
  j["encoding"] = cfg.encoding == Encoding::Utf8 ? "utf-8" : "latin-1";
  for (const auto& [s, f] : cfg.files) {
    if (f.size() == 1) j["files"][std::string(to_string(s))] = f.front();
    else j["files"][std::string(to_string(s))] = f;
  }
  j["columns"]["text"] = cfg.columns.text;
  j["columns"]["target"] = cfg.columns.target;
  j["columns"]["label"] = cfg.columns.label;
  if (cfg.columns.id) j["columns"]["id"] = *cfg.columns.id;
  if (cfg.columns.domain) j["columns"]["domain"] = *cfg.columns.domain;
  for (const auto& [k, c] : cfg.label_map) j["label_map"][k] = std::string(to_string(c));
  j["domain"] = cfg.default_domain;
  return j;
}

CorpusAdapterConfig load_adapter(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read adapter config " + path.string());
  try {
    return adapter_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

// --- parsing ----------------------------------------------------------------

std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char delim,
                                                      bool quoted) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_data = false;
  const std::size_t n = content.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (quoted && c == '"' && field.empty()) {
      in_quotes = true;
      row_has_data = true;
    } else if (c == delim) {
      row.push_back(std::move(field));
      field.clear();
      row_has_data = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < n && content[i + 1] == '\n') ++i;
      if (row_has_data || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      row_has_data = false;
    } else {
      field.push_back(c);
      row_has_data = true;
    }
  }
  if (row_has_data || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string latin1_to_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (char ch : bytes) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) {
      out.push_back(ch);
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_bom(std::string s) {
  if (s.size() >= 3 && s.compare(0, 3, "\xEF\xBB\xBF") == 0) s.erase(0, 3);
  return s;
}

struct RawRow {
  std::size_t row_number;  // 1-based, header is row 1 for delimited files
  std::map<std::string, std::string> fields;
};

std::vector<RawRow> read_rows(const fs::path& path, const CorpusAdapterConfig& cfg) {
  std::string content = strip_bom(read_file(path));
  if (cfg.encoding == Encoding::Latin1) content = latin1_to_utf8(content);

  std::vector<RawRow> out;
  if (cfg.format == FileFormat::Jsonl) {
    std::istringstream in(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (!is_valid_utf8(line))
        throw Error(ErrorCode::EncodingError,
                    path.string() + ": invalid UTF-8 at row " + std::to_string(lineno));
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError,
                    path.string() + ": row " + std::to_string(lineno) + ": " + e.what());
      }
      RawRow row{lineno, {}};
      for (const auto& [k, v] : j.items())
        row.fields[k] = v.is_string() ? v.get<std::string>() : v.dump();
      out.push_back(std::move(row));
    }
    return out;
  }

  const bool csv = cfg.format == FileFormat::Csv;
  auto rows = parse_delimited(content, csv ? ',' : '\t', csv);
  if (rows.empty()) return out;
  const auto& header = rows.front();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::size_t row_number = r + 1;
    RawRow row{row_number, {}};
    for (std::size_t c = 0; c < header.size() && c < rows[r].size(); ++c) {
      if (!is_valid_utf8(rows[r][c]))
        throw Error(ErrorCode::EncodingError, path.string() + ": invalid UTF-8 at row " +
                                                  std::to_string(row_number) + ", column '" +
                                                  header[c] + "'");
      row.fields[header[c]] = rows[r][c];
    }
    out.push_back(std::move(row));
  }
  // header columns must be present even if the file has no data rows
  for (const auto* col : {&cfg.columns.text, &cfg.columns.target, &cfg.columns.label}) {
    if (std::find(header.begin(), header.end(), *col) == header.end())
      throw Error(ErrorCode::MissingColumn, path.string() + ": missing column '" + *col + "'");
  }
  for (const auto& opt : {cfg.columns.id, cfg.columns.domain}) {
    if (opt && std::find(header.begin(), header.end(), *opt) == header.end())
      throw Error(ErrorCode::MissingColumn, path.string() + ": missing column '" + *opt + "'");
  }
  return out;
}

}  // namespace

Dataset ingest(const fs::path& source_dir, const CorpusAdapterConfig& config) {
  if (config.files.empty())
    throw Error(ErrorCode::ConfigError, "adapter '" + config.corpus_name + "' lists no files");
  std::vector<StanceRecord> records;
  std::vector<SourceClass> classes;
  for (const auto& [split, split_files] : config.files) {
    for (std::size_t file_index = 0; file_index < split_files.size(); ++file_index) {
      const auto& file = split_files[file_index];
      const fs::path path = fs::path(file).is_absolute() ? fs::path(file) : source_dir / file;
      const auto rows = read_rows(path, config);
      const std::string id_prefix = config.corpus_name + ":" + std::string(to_string(split)) + ":" +
                                    (split_files.size() > 1 ? std::to_string(file_index) + ":" : "");
      for (const auto& row : rows) {
        auto field = [&](const std::string& col) -> const std::string& {
          auto it = row.fields.find(col);
          if (it == row.fields.end())
            throw Error(ErrorCode::MissingColumn, path.string() + ": row " +
                                                      std::to_string(row.row_number) +
                                                      " missing column '" + col + "'");
          return it->second;
        };
        const std::string& raw_label = field(config.columns.label);
        auto mapped = config.label_map.find(raw_label);
        if (mapped == config.label_map.end())
          throw Error(ErrorCode::UnmappedLabel, path.string() + ": row " +
                                                    std::to_string(row.row_number) +
                                                    ": unmapped label '" + raw_label + "'");
        StanceRecord rec;
        rec.id = config.columns.id ? field(*config.columns.id) : id_prefix + std::to_string(row.row_number);
        rec.text = field(config.columns.text);
        rec.target = field(config.columns.target);
        rec.label = to_label(mapped->second);
        rec.corpus = config.corpus_name;
        rec.split = split;
        rec.domain = config.columns.domain ? field(*config.columns.domain) : config.default_domain;
        records.push_back(std::move(rec));
        classes.push_back(mapped->second);
      }
    }
  }
  return Dataset(config.corpus_name, std::move(records), std::move(classes));
}

Dataset unify_labels(const Dataset& ds) {
  std::vector<SourceClass> classes = ds.source_classes();
  for (auto& c : classes)
    if (c == SourceClass::Neutral) c = SourceClass::None;
  return Dataset(ds.name(), ds.records(), std::move(classes));
}

Dataset extend_none_subset(const Dataset& train, const NoneExtensionOptions& opts) {
  if (!(opts.fraction > 0.0 && opts.fraction <= 1.0))
    throw Error(ErrorCode::PreconditionViolated, "fraction must be in (0, 1]");
  const auto& pool = train.split_indices(Split::Train);
  if (pool.empty()) throw Error(ErrorCode::PreconditionViolated, "no train records");
  const std::size_t n = pool.size();
  std::set<std::vector<std::string>> distinct;
  for (auto i : pool) distinct.insert(text::normalized_words(train[i].target));
  if (distinct.size() < 2)
    throw Error(ErrorCode::InsufficientDiversity,
                "None extension needs at least two distinct targets in the train split");
  const auto n_add = static_cast<std::size_t>(std::floor(opts.fraction * static_cast<double>(n)));

  std::unordered_set<std::string> ids;
  for (const auto& r : train.records()) ids.insert(r.id);

  Rng rng(opts.seed);
  std::vector<std::size_t> hosts(n);  // positions into pool
  for (std::size_t i = 0; i < n; ++i) hosts[i] = i;
  rng.shuffle(hosts);

  std::vector<StanceRecord> records = train.records();
  std::vector<SourceClass> classes = train.source_classes();
  for (std::size_t k = 0; k < n_add; ++k) {
    const std::size_t host_pos = hosts[k];
    const StanceRecord& host = train[pool[host_pos]];
    const auto host_target = text::normalized_words(host.target);
    std::optional<std::string> chosen;
    for (std::size_t draw = 0; draw < opts.max_draws_per_record && n > 1; ++draw) {
      // uniform over every pool position except the host
      std::size_t j = rng.uniform_index(n - 1);
      if (j >= host_pos) ++j;
      const std::string& cand = train[pool[j]].target;
      if (text::normalized_words(cand) == host_target) continue;
      if (text::contains_mention(host.text, cand)) continue;
      chosen = cand;
      break;
    }
    if (!chosen)
      throw Error(ErrorCode::InsufficientDiversity,
                  "no irrelevant target found for record '" + host.id + "' after " +
                      std::to_string(opts.max_draws_per_record) + " draws");
    StanceRecord rec = host;
    rec.id = host.id + "~none";
    for (int suffix = 2; ids.count(rec.id) != 0; ++suffix)
      rec.id = host.id + "~none" + std::to_string(suffix);
    ids.insert(rec.id);
    rec.target = *chosen;
    rec.label = StanceLabel::None;
    rec.split = Split::Train;
    records.push_back(std::move(rec));
    classes.push_back(SourceClass::None);
  }
  return Dataset(train.name(), std::move(records), std::move(classes));
}

// --- stats --------------------------------------------------------------------

StatsReport stats(const Dataset& ds) {
  StatsReport rep;
  rep.name = ds.name();
  rep.total = ds.size();
  for (const auto& r : ds.records()) {
    ++rep.split_counts[static_cast<std::size_t>(r.split)];
    auto& t = rep.targets[r.target];
    ++t.count;
    ++t.labels[index_of(r.label)];
  }
  return rep;
}

nlohmann::json to_json(const StatsReport& report) {
  nlohmann::json j;
  j["name"] = report.name;
  j["total"] = report.total;
  for (auto s : kAllSplits)
    j["splits"][std::string(to_string(s))] = report.split_counts[static_cast<std::size_t>(s)];
  j["targets"] = nlohmann::json::object();
  for (const auto& [name, t] : report.targets) {
    nlohmann::json tj;
    tj["count"] = t.count;
    for (auto l : kAllLabels) tj["labels"][std::string(to_string(l))] = t.labels[index_of(l)];
    j["targets"][name] = tj;
  }
  return j;
}

namespace {

std::string with_commas(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  const std::size_t len = digits.size();
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0 && (len - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string count_cell(std::size_t n) { return n == 0 ? "-" : with_commas(n); }

std::string pad(const std::string& s, std::size_t width, bool right) {
  if (s.size() >= width) return s;
  return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_stats_table(const std::vector<StatsReport>& reports) {
  struct Row {
    std::string corpus, targets, train, valid, test;
  };
  std::vector<Row> rows;
  rows.push_back({"Corpus", "Targets for Stance Labeling", "Train", "Valid", "Test"});
  for (const auto& r : reports) {
    std::string targets;
    if (r.targets.size() > 8) {
      targets = std::to_string(r.targets.size()) + " targets";
    } else {
      for (const auto& [name, _] : r.targets) {
        if (!targets.empty()) targets += ", ";
        targets += name;
      }
    }
    rows.push_back({r.name, targets, count_cell(r.split_counts[0]), count_cell(r.split_counts[1]),
                    count_cell(r.split_counts[2])});
  }
  std::array<std::size_t, 5> w{};
  for (const auto& row : rows) {
    w[0] = std::max(w[0], row.corpus.size());
    w[1] = std::max(w[1], row.targets.size());
    w[2] = std::max(w[2], row.train.size());
    w[3] = std::max(w[3], row.valid.size());
    w[4] = std::max(w[4], row.test.size());
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    out << pad(row.corpus, w[0], false) << " | " << pad(row.targets, w[1], false) << " | "
        << pad(row.train, w[2], true) << " | " << pad(row.valid, w[3], true) << " | "
        << pad(row.test, w[4], true) << '\n';
    if (i == 0) {
      out << std::string(w[0], '-') << "-+-" << std::string(w[1], '-') << "-+-"
          << std::string(w[2], '-') << "-+-" << std::string(w[3], '-') << "-+-"
          << std::string(w[4], '-') << '\n';
    }
  }
  return out.str();
}

// --- canonical JSONL ----------------------------------------------------------

std::string to_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& r : ds.records()) {
    out += to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

void write_jsonl(const Dataset& ds, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write " + path.string());
  out << to_jsonl(ds);
}

Dataset read_jsonl(const fs::path& path, std::string name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + path.string());
  std::vector<StanceRecord> recs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      recs.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (name.empty()) name = recs.empty() ? path.stem().string() : recs.front().corpus;
  return Dataset(std::move(name), std::move(recs));
}

}  // namespace stance::corpus
