#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "stance/model.hpp"
#include "stance/rng.hpp"
#include "stance/text.hpp"

namespace stance::model {

const std::array<std::string, Vocab::kNumReserved>& Vocab::reserved() {
  static const std::array<std::string, kNumReserved> kReserved = {"<pad>", "<unk>", "<t>", "</t>",
                                                                  "<sep>"};
  return kReserved;
}

Vocab::Vocab() : Vocab(std::vector<std::string>(reserved().begin(), reserved().end())) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::int32_t i = 0; i < kNumReserved; ++i) {
    if (static_cast<std::size_t>(i) >= tokens_.size() || tokens_[i] != reserved()[i])
      throw Error(ErrorCode::FormatError, "vocab must start with the reserved markers");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second)
      throw Error(ErrorCode::FormatError, "duplicate vocab token '" + tokens_[i] + "'");
  }
}

std::int32_t Vocab::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  return h;
}

Vocab build_vocab(const corpus::Dataset& ds, std::size_t min_freq) {
  if (min_freq < 1) throw Error(ErrorCode::PreconditionViolated, "min_freq must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& r : ds.records()) {
    for (auto& t : text::token_strings(r.text)) ++freq[t];
    for (auto& t : text::token_strings(r.target)) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n < min_freq) continue;
    if (std::find(Vocab::reserved().begin(), Vocab::reserved().end(), tok) != Vocab::reserved().end())
      continue;
    kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens(Vocab::reserved().begin(), Vocab::reserved().end());
  for (auto& [tok, _] : kept) tokens.push_back(tok);
  return Vocab(std::move(tokens));
}

EmbeddingMatrix random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed) {
  EmbeddingMatrix m{vocab.size(), dim, std::vector<double>(vocab.size() * dim)};
  Rng rng(seed);
  for (auto& v : m.values) v = rng.uniform(-0.05, 0.05);
  return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                                std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read embeddings " + path.string());
  std::vector<std::vector<double>> found(vocab.size());
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    std::vector<double> vec;
    std::string field;
    while (ls >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(lineno) +
                                                ": non-numeric value '" + field + "'");
      }
    }
    // word2vec-style "count dim" header
    if (lineno == 1 && vec.size() == 1 &&
        token.find_first_not_of("0123456789") == std::string::npos)
      continue;
    if (dim == 0) {
      if (vec.empty())
        throw Error(ErrorCode::DimensionMismatch, path.string() + ": row 1 has no values");
      dim = vec.size();
    } else if (vec.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(dim) + " values, found " + std::to_string(vec.size()));
    }
    if (vocab.contains(token)) {
      auto idx = static_cast<std::size_t>(vocab.lookup(token));
      if (found[idx].empty()) found[idx] = std::move(vec);
    }
  }
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, path.string() + ": no vectors");
  EmbeddingMatrix m{vocab.size(), dim, std::vector<double>(vocab.size() * dim)};
  Rng rng(seed);
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    auto row = m.row(r);
    if (!found[r].empty()) {
      std::copy(found[r].begin(), found[r].end(), row.begin());
    } else {
      for (auto& v : row) v = rng.uniform(-0.05, 0.05);
    }
  }
  return m;
}

EncodedInput encode_input(const StanceRecord& rec, const Vocab& vocab, bool with_target,
                          std::size_t max_text_tokens) {
  EncodedInput out;
  out.ids.push_back(Vocab::kTargetOpen);
  out.target_begin = 1;
  if (with_target)
    for (const auto& t : text::token_strings(rec.target)) out.ids.push_back(vocab.lookup(t));
  out.target_end = out.ids.size();
  out.ids.push_back(Vocab::kTargetClose);
  out.ids.push_back(Vocab::kSep);
  out.text_begin = out.ids.size();
  auto words = text::token_strings(rec.text);
  if (words.size() > max_text_tokens) words.resize(max_text_tokens);
  for (const auto& w : words) out.ids.push_back(vocab.lookup(w));
  return out;
}

}  // namespace stance::model
