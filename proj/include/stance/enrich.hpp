#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stance/core.hpp"

namespace stance::enrich {

enum class Pos : std::uint8_t { Noun, Verb, Adj, Det, Pron, Adp, Punct, Sym, Other };

std::string_view to_string(Pos pos);

struct TaggedToken {
  std::string surface;
  Pos pos = Pos::Other;
  std::size_t char_start = 0;  // byte offsets into the tagged text
  std::size_t char_end = 0;

  bool operator==(const TaggedToken&) const = default;
};

// Pluggable part-of-speech tagger. Implementations must be deterministic and
// cover every non-whitespace byte with ordered, non-overlapping tokens.
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual std::vector<TaggedToken> tag(std::string_view text) const = 0;
};

// Closed-class lexicon, suffix rules, NOUN fallback.
class HeuristicTagger final : public Tagger {
 public:
  std::vector<TaggedToken> tag(std::string_view text) const override;
  Pos tag_word(std::string_view word) const;
};

std::vector<TaggedToken> tag(std::string_view text);  // uses HeuristicTagger

struct CandidatePhrase {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::size_t first_token = 0;  // token span [first_token, last_token]
  std::size_t last_token = 0;
  std::size_t head_noun_index = 0;  // token index of the rightmost noun

  bool operator==(const CandidatePhrase&) const = default;
};

// Maximal left-to-right chunks matching DET? ADJ* NOUN+.
std::vector<CandidatePhrase> extract_candidates(std::string_view text,
                                                std::span<const TaggedToken> tokens);

struct FilterOptions {
  std::size_t verb_window = 2;  // tokens on either side of the phrase
  std::size_t min_chars = 4;
};

// Keeps candidates near a verb, at least min_chars long, and not starting
// with '#' or "@user". Returned objects carry StanceLabel::None as a
// placeholder until annotated.
std::vector<ExplicitObject> filter_candidates(std::span<const CandidatePhrase> cands,
                                              std::span<const TaggedToken> tokens,
                                              const FilterOptions& opts = {});

bool detect_explicit_mention(std::string_view text, std::string_view target);

// Pairs the record with its earliest explicit object whose label opposes the
// record label. Throws NoDisalignedObject when none exists.
EnrichedRecord propose_adversarial_pair(const StanceRecord& rec,
                                        std::span<const ExplicitObject> labeled_objects);

// Second training record of an adversarial pair: same text, the paired
// explicit object as target.
StanceRecord paired_record(const EnrichedRecord& rec);

double cohen_kappa(std::span<const StanceLabel> votes_a, std::span<const StanceLabel> votes_b);

// --- annotation data ------------------------------------------------------

struct AnnotationVote {
  std::string record_id;
  std::string object_surface;
  std::string annotator_id;
  StanceLabel label = StanceLabel::None;
  std::int64_t timestamp = 0;  // milliseconds since epoch

  bool operator==(const AnnotationVote&) const = default;
};

nlohmann::json to_json(const AnnotationVote& v);
AnnotationVote vote_from_json(const nlohmann::json& j);

// One unit of annotation work: a record and its candidate explicit objects.
struct AnnotationItem {
  StanceRecord record;
  std::vector<ExplicitObject> candidates;

  bool operator==(const AnnotationItem&) const = default;
};

nlohmann::json to_json(const AnnotationItem& item);
AnnotationItem item_from_json(const nlohmann::json& j);

struct ExtractionOptions {
  FilterOptions filter;
  bool polar_only = true;  // None records cannot yield a dis-aligned pair
};

// Records whose target is not mentioned in the text and that keep at least
// one filtered candidate.
std::vector<AnnotationItem> build_annotation_batch(std::span<const StanceRecord> records,
                                                   const Tagger& tagger,
                                                   const ExtractionOptions& opts = {});

using ObjectKey = std::pair<std::string, std::string>;  // (record_id, object_surface)

// Latest vote per annotator wins; majority over annotators; ties stay
// unresolved (absent from the result).
std::map<ObjectKey, StanceLabel> resolve_votes(std::span<const AnnotationVote> votes);

// Latest vote per (record, object, annotator).
std::map<ObjectKey, std::map<std::string, StanceLabel>> latest_votes(
    std::span<const AnnotationVote> votes);

}  // namespace stance::enrich
