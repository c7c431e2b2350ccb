#include <bit>
#include <cstring>
#include <fstream>

#include "stance/model.hpp"

namespace stance::model {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'N', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(std::istream& in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) throw Error(ErrorCode::FormatError, "truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void save_checkpoint(const Classifier& clf, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write checkpoint " + path.string());
  nlohmann::json header;
  header["config"] = to_json(clf.params.config());
  header["vocab"] = clf.vocab.tokens();
  header["vocab_hash"] = clf.vocab.hash();
  header["param_count"] = clf.params.size();
  for (const auto& b : clf.params.blocks())
    header["layout"].push_back({{"name", b.name}, {"offset", b.offset}, {"rows", b.rows}, {"cols", b.cols}});
  const std::string meta = header.dump();

  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  for (double v : clf.params.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error(ErrorCode::FileUnreadable, "failed writing checkpoint " + path.string());
}

Classifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorCode::FormatError, path.string() + " is not a stance checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion)
    throw Error(ErrorCode::FormatError, "unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = get_le<std::uint64_t>(in);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw Error(ErrorCode::FormatError, "truncated checkpoint header");
  const auto header = nlohmann::json::parse(meta);

  Vocab vocab(header.at("vocab").get<std::vector<std::string>>());
  if (vocab.hash() != header.at("vocab_hash").get<std::uint64_t>())
    throw Error(ErrorCode::FormatError, "checkpoint vocab hash mismatch");
  ModelParams params(model_config_from_json(header.at("config")));
  if (params.config().vocab_size != vocab.size())
    throw Error(ErrorCode::DimensionMismatch, "checkpoint vocab size disagrees with config");
  if (params.size() != header.at("param_count").get<std::size_t>())
    throw Error(ErrorCode::DimensionMismatch, "checkpoint parameter count disagrees with config");
  for (auto& v : params.values()) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return Classifier{std::move(vocab), std::move(params)};
}

}  // namespace stance::model
