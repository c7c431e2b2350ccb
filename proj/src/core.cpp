#include "stance/core.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "stance/text.hpp"

namespace stance {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UndefinedComposition: return "UndefinedComposition";
    case ErrorCode::UndefinedAlignment: return "UndefinedAlignment";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnmappedLabel: return "UnmappedLabel";
    case ErrorCode::EncodingError: return "EncodingError";
    case ErrorCode::InsufficientDiversity: return "InsufficientDiversity";
    case ErrorCode::NoDisalignedObject: return "NoDisalignedObject";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::SizeExceedsPool: return "SizeExceedsPool";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::DuplicateVote: return "DuplicateVote";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

std::string_view to_string(StanceLabel label) {
  switch (label) {
    case StanceLabel::Favor: return "FAVOR";
    case StanceLabel::Against: return "AGAINST";
    case StanceLabel::None: return "NONE";
  }
  return "NONE";
}

std::optional<StanceLabel> parse_label(std::string_view text) {
  const std::string up = [&] {
    std::string s(text);
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  }();
  if (up == "FAVOR") return StanceLabel::Favor;
  if (up == "AGAINST") return StanceLabel::Against;
  if (up == "NONE") return StanceLabel::None;
  return std::nullopt;
}

StanceLabel flip(StanceLabel label) {
  switch (label) {
    case StanceLabel::Favor: return StanceLabel::Against;
    case StanceLabel::Against: return StanceLabel::Favor;
    case StanceLabel::None: return StanceLabel::None;
  }
  return label;
}

Alignment alignment_from_int(int value) {
  switch (value) {
    case -1: return Alignment::Opposite;
    case 0: return Alignment::Unrelated;
    case 1: return Alignment::Same;
    default:
      throw Error(ErrorCode::FormatError,
                  "alignment must be -1, 0 or 1, got " + std::to_string(value));
  }
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view text) {
  const auto s = text::to_lower_ascii(text);
  if (s == "train") return Split::Train;
  if (s == "valid" || s == "validation" || s == "dev") return Split::Valid;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

StanceLabel compose_label(StanceLabel explicit_label, Alignment alignment) {
  if (alignment == Alignment::Unrelated) return StanceLabel::None;
  if (explicit_label == StanceLabel::None)
    throw Error(ErrorCode::UndefinedComposition,
                "cannot compose a None-labeled explicit object with nonzero alignment");
  return alignment == Alignment::Same ? explicit_label : flip(explicit_label);
}

Alignment derive_alignment(StanceLabel explicit_label, StanceLabel target_label) {
  if (target_label == StanceLabel::None) return Alignment::Unrelated;
  if (explicit_label == StanceLabel::None)
    throw Error(ErrorCode::UndefinedAlignment,
                "a None-labeled explicit object has no alignment to a polar target");
  return explicit_label == target_label ? Alignment::Same : Alignment::Opposite;
}

std::vector<std::string> validate_record(const StanceRecord& rec) {
  std::vector<std::string> out;
  if (rec.id.empty()) out.emplace_back("id: must be non-empty");
  if (rec.text.empty()) out.emplace_back("text: must be non-empty");
  if (rec.target.empty()) out.emplace_back("target: must be non-empty");
  if (!is_valid_utf8(rec.text)) out.emplace_back("text: invalid UTF-8");
  if (!is_valid_utf8(rec.target)) out.emplace_back("target: invalid UTF-8");
  return out;
}

std::vector<std::string> validate_enriched(const EnrichedRecord& rec) {
  std::vector<std::string> out = validate_record(rec.base);
  const auto& text = rec.base.text;
  const auto& objects = rec.explicit_objects;

  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& obj = objects[i];
    const std::string where = "explicit_objects[" + std::to_string(i) + "]";
    if (!(obj.char_start < obj.char_end && obj.char_end <= text.size())) {
      out.push_back(where + ": offsets [" + std::to_string(obj.char_start) + ", " +
                    std::to_string(obj.char_end) + ") outside text");
    } else if (text.compare(obj.char_start, obj.char_end - obj.char_start, obj.surface) != 0) {
      out.push_back(where + ": surface '" + obj.surface + "' differs from text slice");
    }
  }

  if (rec.explicit_mention) {
    const bool matched = std::any_of(objects.begin(), objects.end(), [&](const auto& o) {
      return text::contains_mention(o.surface, rec.base.target);
    });
    if (!matched)
      out.emplace_back("explicit_mention: true but no explicit object matches target '" +
                       rec.base.target + "'");
  }

  std::set<std::size_t> seen;
  std::optional<StanceLabel> implied;
  bool conflict = false;
  for (std::size_t k = 0; k < rec.alignments.size(); ++k) {
    const auto& pair = rec.alignments[k];
    const std::string where = "alignments[" + std::to_string(k) + "]";
    if (pair.explicit_object_index >= objects.size()) {
      out.push_back(where + ": explicit_object_index " +
                    std::to_string(pair.explicit_object_index) + " out of range (" +
                    std::to_string(objects.size()) + " objects)");
      continue;
    }
    if (!seen.insert(pair.explicit_object_index).second)
      out.push_back(where + ": duplicate pair for explicit_object_index " +
                    std::to_string(pair.explicit_object_index));
    const auto& obj = objects[pair.explicit_object_index];
    if (pair.alignment == Alignment::Unrelated) continue;
    if (obj.label == StanceLabel::None) {
      out.push_back(where + ": None-labeled object '" + obj.surface +
                    "' cannot carry a nonzero alignment");
      continue;
    }
    const StanceLabel composed = compose_label(obj.label, pair.alignment);
    if (composed != rec.base.label) {
      out.push_back(where + ": compose_label(" + std::string(to_string(obj.label)) + ", " +
                    std::to_string(to_int(pair.alignment)) + ") = " +
                    std::string(to_string(composed)) + " but base.label is " +
                    std::string(to_string(rec.base.label)));
    }
    if (implied && *implied != composed) conflict = true;
    implied = composed;
  }
  if (conflict)
    out.emplace_back("alignments: explicit objects imply conflicting labels for the target");
  return out;
}

// --- serialization ---------------------------------------------------------

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end())
    throw Error(ErrorCode::FormatError, std::string("missing field '") + key + "'");
  return *it;
}

StanceLabel label_field(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw Error(ErrorCode::FormatError, std::string(key) + " must be a string");
  auto l = parse_label(v.get<std::string>());
  if (!l) throw Error(ErrorCode::InvalidLabel, "unknown label '" + v.get<std::string>() + "'");
  return *l;
}

std::string string_field(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw Error(ErrorCode::FormatError, std::string(key) + " must be a string");
  return v.get<std::string>();
}

}  // namespace

nlohmann::json to_json(const StanceRecord& rec) {
  nlohmann::json j;
  j["id"] = rec.id;
  j["text"] = rec.text;
  j["target"] = rec.target;
  j["label"] = std::string(to_string(rec.label));
  j["corpus"] = rec.corpus;
  j["split"] = std::string(to_string(rec.split));
  j["domain"] = rec.domain;
  return j;
}

StanceRecord record_from_json(const nlohmann::json& j) {
  StanceRecord r;
  r.id = string_field(j, "id");
  r.text = string_field(j, "text");
  r.target = string_field(j, "target");
  r.label = label_field(j, "label");
  r.corpus = j.contains("corpus") ? string_field(j, "corpus") : std::string{};
  const auto split = string_field(j, "split");
  auto s = parse_split(split);
  if (!s) throw Error(ErrorCode::FormatError, "unknown split '" + split + "'");
  r.split = *s;
  r.domain = j.contains("domain") ? string_field(j, "domain") : std::string{};
  return r;
}

nlohmann::json to_json(const EnrichedRecord& rec) {
  nlohmann::json j;
  j["base"] = to_json(rec.base);
  j["explicit_objects"] = nlohmann::json::array();
  for (const auto& o : rec.explicit_objects) {
    j["explicit_objects"].push_back({
        {"surface", o.surface},
        {"char_start", byte_to_codepoint_offset(rec.base.text, o.char_start)},
        {"char_end", byte_to_codepoint_offset(rec.base.text, o.char_end)},
        {"label", std::string(to_string(o.label))},
    });
  }
  j["explicit_mention"] = rec.explicit_mention;
  j["alignments"] = nlohmann::json::array();
  for (const auto& a : rec.alignments) {
    j["alignments"].push_back(
        {{"explicit_object_index", a.explicit_object_index}, {"alignment", to_int(a.alignment)}});
  }
  return j;
}

EnrichedRecord enriched_from_json(const nlohmann::json& j) {
  EnrichedRecord r;
  r.base = record_from_json(require(j, "base"));
  for (const auto& o : require(j, "explicit_objects")) {
    ExplicitObject obj;
    obj.surface = string_field(o, "surface");
    obj.char_start = codepoint_to_byte_offset(r.base.text, require(o, "char_start").get<std::size_t>());
    obj.char_end = codepoint_to_byte_offset(r.base.text, require(o, "char_end").get<std::size_t>());
    obj.label = label_field(o, "label");
    r.explicit_objects.push_back(std::move(obj));
  }
  r.explicit_mention = require(j, "explicit_mention").get<bool>();
  for (const auto& a : require(j, "alignments")) {
    r.alignments.push_back({require(a, "explicit_object_index").get<std::size_t>(),
                            alignment_from_int(require(a, "alignment").get<int>())});
  }
  return r;
}

// --- UTF-8 -----------------------------------------------------------------

namespace {
bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }
}  // namespace

std::size_t byte_to_codepoint_offset(std::string_view text, std::size_t byte_offset) {
  std::size_t cps = 0;
  const std::size_t limit = std::min(byte_offset, text.size());
  for (std::size_t i = 0; i < limit; ++i)
    if (!is_continuation(static_cast<unsigned char>(text[i]))) ++cps;
  return cps + (byte_offset - limit);
}

std::size_t codepoint_to_byte_offset(std::string_view text, std::size_t cp_offset) {
  std::size_t cps = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_continuation(static_cast<unsigned char>(text[i]))) {
      if (cps == cp_offset) return i;
      ++cps;
    }
  }
  return text.size() + (cp_offset - cps);
}

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) { ++i; continue; }
    if ((c & 0xE0) == 0xC0) { len = 2; cp = c & 0x1F; }
    else if ((c & 0xF0) == 0xE0) { len = 3; cp = c & 0x0F; }
    else if ((c & 0xF8) == 0xF0) { len = 4; cp = c & 0x07; }
    else return false;
    if (i + len > text.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if (!is_continuation(cc)) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // reject overlong forms, surrogates and out-of-range values
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
      return false;
    i += len;
  }
  return true;
}

}  // namespace stance
