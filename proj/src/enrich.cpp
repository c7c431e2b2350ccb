#include "stance/enrich.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "stance/text.hpp"

namespace stance::enrich {

std::string_view to_string(Pos pos) {
  switch (pos) {
    case Pos::Noun: return "NOUN";
    case Pos::Verb: return "VERB";
    case Pos::Adj: return "ADJ";
    case Pos::Det: return "DET";
    case Pos::Pron: return "PRON";
    case Pos::Adp: return "ADP";
    case Pos::Punct: return "PUNCT";
    case Pos::Sym: return "SYM";
    case Pos::Other: return "OTHER";
  }
  return "OTHER";
}

namespace {

const std::unordered_map<std::string_view, Pos>& lexicon() {
  static const auto* table = [] {
    auto* m = new std::unordered_map<std::string_view, Pos>;
    auto add = [&](Pos p, std::initializer_list<std::string_view> words) {
      for (auto w : words) m->emplace(w, p);
    };
    add(Pos::Det, {"a", "an", "the", "this", "that", "these", "those", "every", "each", "some",
                   "any", "no", "another", "my", "your", "his", "its", "our", "their", "her",
                   "such", "either", "neither"});
    add(Pos::Pron, {"i", "me", "you", "he", "him", "she", "it", "we", "us", "they", "them",
                    "myself", "yourself", "himself", "herself", "itself", "ourselves",
                    "themselves", "who", "whom", "whose", "what", "which", "someone",
                    "everyone", "anyone", "nobody", "nothing", "something", "everything",
                    "anything", "mine", "yours", "ours", "theirs", "hers", "one", "i'm",
                    "you're", "we're", "they're", "it's", "he's", "she's", "i've", "i'll"});
    add(Pos::Adp, {"in", "on", "at", "for", "with", "about", "against", "of", "to", "from",
                   "by", "into", "onto", "over", "under", "between", "through", "during",
                   "before", "after", "without", "within", "upon", "among", "across",
                   "toward", "towards", "via", "per", "around", "behind", "beyond", "despite",
                   "near", "off", "since", "until", "like"});
    add(Pos::Verb,
        {"is", "am", "are", "was", "were", "be", "been", "being", "have", "has", "had",
         "do", "does", "did", "done", "can", "could", "will", "would", "shall", "should",
         "may", "might", "must", "don't", "doesn't", "didn't", "can't", "won't", "isn't",
         "aren't", "wasn't", "weren't", "shouldn't", "wouldn't", "couldn't", "haven't",
         "hasn't", "wear", "believe", "think", "know", "say", "said", "says", "want", "need",
         "support", "supports", "love", "loves", "hate", "hates", "oppose", "opposes",
         "reject", "rejects", "trust", "trusts", "vote", "votes", "stand", "stands", "stop",
         "protect", "protects", "make", "makes", "made", "get", "gets", "got", "go", "goes",
         "went", "see", "saw", "give", "gave", "take", "took", "let", "keep", "kept", "feel",
         "felt", "hope", "fight", "fights", "kill", "kills", "ban", "allow", "allows", "help",
         "helps", "care", "cares", "back", "backs", "praise", "praises", "defend", "defends",
         "applaud", "applauds", "condemn", "condemns", "attack", "attacks", "blame",
         "blames", "distrust", "distrusts", "agree", "agrees", "disagree", "deserve",
         "deserves", "choose", "win", "wins", "won", "lose", "loses", "lost", "pray", "thank",
         "stay", "mean", "means", "remind", "hurt", "hurts", "become", "came", "come", "comes",
         "tell", "told", "ask", "asked", "put", "bring", "brought", "leave", "left", "call",
         "read", "seem", "seems", "show", "shows", "try", "tries", "use", "uses", "work",
         "works", "live", "lives", "die", "dies", "pay", "run", "respect", "respects",
         "admire", "admires", "fear", "fears", "doubt", "doubts", "endorse", "endorses",
         "denounce", "denounces", "mock", "mocks", "celebrate", "celebrates", "cheer",
         "cheers", "dismiss", "dismisses"});
    add(Pos::Adj, {"good", "bad", "great", "new", "old", "big", "small", "many", "much", "more",
                   "most", "other", "same", "free", "true", "false", "real", "right", "wrong",
                   "high", "low", "best", "worst", "better", "worse", "poor", "rich",
                   "strong", "weak", "sure", "whole", "public", "social", "human", "unborn",
                   "american", "own", "few", "last", "next", "first", "young", "long",
                   "full", "safe", "sick", "evil", "fair", "happy", "sad", "proud", "whole",
                   "open", "closed", "equal", "liberal", "conservative", "federal", "legal",
                   "illegal", "political", "national", "global", "local", "moral", "natural",
                   "medical", "total", "awful", "terrible", "horrible", "amazing",
                   "wonderful", "brave", "smart", "stupid", "crazy", "corrupt", "honest"});
    add(Pos::Other, {"and", "or", "but", "so", "if", "because", "while", "then", "than",
                     "not", "never", "very", "really", "just", "now", "also", "too", "still",
                     "even", "only", "here", "there", "always", "again", "ever", "yes", "how",
                     "why", "when", "where", "please", "all", "both", "nor", "yet", "once",
                     "soon", "already", "often", "maybe", "perhaps", "rt", "lol", "oh",
                     "well", "up", "down", "out", "away"});
    return m;
  }();
  return *table;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool all_digits(std::string_view s) {
  bool digit = false;
  for (unsigned char c : s) {
    if (std::isdigit(c)) digit = true;
    else if (c != '.' && c != ',' && c != ':' && c != '/') return false;
  }
  return digit;
}

bool is_punct_only(std::string_view s) {
  static constexpr std::string_view kPunct = ".,;:!?\"'()[]{}-";
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return kPunct.find(c) != std::string_view::npos; });
}

std::size_t codepoints(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace

Pos HeuristicTagger::tag_word(std::string_view word) const {
  if (word.empty()) return Pos::Other;
  const auto first = static_cast<unsigned char>(word.front());
  if (first == '#') return word.size() > 1 ? Pos::Sym : Pos::Punct;
  if (first == '@') return word.size() > 1 ? Pos::Noun : Pos::Sym;
  if (word.starts_with("http://") || word.starts_with("https://")) return Pos::Sym;
  const bool has_word_byte = std::any_of(word.begin(), word.end(), [](char ch) {
    const auto c = static_cast<unsigned char>(ch);
    return c >= 0x80 || std::isalnum(c);
  });
  if (!has_word_byte) return is_punct_only(word) ? Pos::Punct : Pos::Sym;
  if (all_digits(word)) return Pos::Other;

  const std::string lower = text::to_lower_ascii(word);
  const auto& lex = lexicon();
  if (auto it = lex.find(lower); it != lex.end()) return it->second;

  if (lower.size() > 3 && ends_with(lower, "ly")) return Pos::Other;
  for (auto suf : {"tion", "sion", "ment", "ness", "ity", "ism", "ist", "ance", "ence", "ship"})
    if (lower.size() > std::string_view(suf).size() + 2 && ends_with(lower, suf)) return Pos::Noun;
  for (auto suf : {"ous", "ful", "ive", "able", "ible", "less", "ical", "ish", "born"})
    if (lower.size() > std::string_view(suf).size() + 2 && ends_with(lower, suf)) return Pos::Adj;
  if (lower.size() > 4 && ends_with(lower, "ing")) return Pos::Verb;
  if (lower.size() > 3 && ends_with(lower, "ed")) return Pos::Verb;
  if (lower.ends_with("n't")) return Pos::Verb;
  return Pos::Noun;
}

std::vector<TaggedToken> HeuristicTagger::tag(std::string_view text_in) const {
  std::vector<TaggedToken> out;
  for (auto& tok : text::tokenize(text_in)) {
    const Pos p = tag_word(tok.surface);
    out.push_back(TaggedToken{std::move(tok.surface), p, tok.begin, tok.end});
  }
  return out;
}

std::vector<TaggedToken> tag(std::string_view text_in) { return HeuristicTagger{}.tag(text_in); }

std::vector<CandidatePhrase> extract_candidates(std::string_view text_in,
                                                std::span<const TaggedToken> tokens) {
  std::vector<CandidatePhrase> out;
  const std::size_t n = tokens.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    if (tokens[j].pos == Pos::Det) ++j;
    while (j < n && tokens[j].pos == Pos::Adj) ++j;
    const std::size_t noun_start = j;
    while (j < n && tokens[j].pos == Pos::Noun) ++j;
    if (j == noun_start) {
      ++i;
      continue;
    }
    CandidatePhrase c;
    c.first_token = i;
    c.last_token = j - 1;
    c.head_noun_index = j - 1;
    c.char_start = tokens[i].char_start;
    c.char_end = tokens[j - 1].char_end;
    c.surface = std::string(text_in.substr(c.char_start, c.char_end - c.char_start));
    out.push_back(std::move(c));
    i = j;
  }
  return out;
}

std::vector<ExplicitObject> filter_candidates(std::span<const CandidatePhrase> cands,
                                              std::span<const TaggedToken> tokens,
                                              const FilterOptions& opts) {
  std::vector<ExplicitObject> out;
  for (const auto& c : cands) {
    if (codepoints(c.surface) < opts.min_chars) continue;
    if (!c.surface.empty() && c.surface.front() == '#') continue;
    if (text::to_lower_ascii(c.surface).starts_with("@user")) continue;

    const std::size_t lo = c.first_token >= opts.verb_window ? c.first_token - opts.verb_window : 0;
    const std::size_t hi = std::min(tokens.size(), c.last_token + 1 + opts.verb_window);
    bool near_verb = false;
    for (std::size_t k = lo; k < hi && !near_verb; ++k) {
      if (k >= c.first_token && k <= c.last_token) continue;
      near_verb = tokens[k].pos == Pos::Verb;
    }
    if (!near_verb) continue;
    out.push_back(ExplicitObject{c.surface, c.char_start, c.char_end, StanceLabel::None});
  }
  return out;
}

bool detect_explicit_mention(std::string_view text_in, std::string_view target) {
  return text::contains_mention(text_in, target);
}

EnrichedRecord propose_adversarial_pair(const StanceRecord& rec,
                                        std::span<const ExplicitObject> labeled_objects) {
  if (rec.label == StanceLabel::None)
    throw Error(ErrorCode::PreconditionViolated,
                "record '" + rec.id + "' has a None label; no dis-alignment is possible");
  if (labeled_objects.empty())
    throw Error(ErrorCode::PreconditionViolated, "record '" + rec.id + "' has no labeled objects");

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < labeled_objects.size(); ++i) {
    const auto& o = labeled_objects[i];
    if (o.label == StanceLabel::None) continue;
    if (derive_alignment(o.label, rec.label) != Alignment::Opposite) continue;
    if (!best || o.char_start < labeled_objects[*best].char_start) best = i;
  }
  if (!best)
    throw Error(ErrorCode::NoDisalignedObject,
                "record '" + rec.id + "' has no explicit object dis-aligned with its label");

  EnrichedRecord out;
  out.base = rec;
  out.explicit_objects.assign(labeled_objects.begin(), labeled_objects.end());
  out.explicit_mention = detect_explicit_mention(rec.text, rec.target);
  if (out.explicit_mention &&
      std::none_of(labeled_objects.begin(), labeled_objects.end(),
                   [&](const auto& o) { return text::contains_mention(o.surface, rec.target); }))
    throw Error(ErrorCode::PreconditionViolated,
                "target of record '" + rec.id + "' is mentioned but is not an explicit object");
  out.alignments.push_back({*best, Alignment::Opposite});
  return out;
}

StanceRecord paired_record(const EnrichedRecord& rec) {
  if (rec.alignments.empty())
    throw Error(ErrorCode::PreconditionViolated, "enriched record '" + rec.base.id + "' has no pair");
  const auto& obj = rec.explicit_objects.at(rec.alignments.front().explicit_object_index);
  StanceRecord out = rec.base;
  out.id = rec.base.id + "~adv";
  out.target = obj.surface;
  out.label = obj.label;
  return out;
}

double cohen_kappa(std::span<const StanceLabel> votes_a, std::span<const StanceLabel> votes_b) {
  if (votes_a.size() != votes_b.size() || votes_a.empty())
    throw Error(ErrorCode::LengthMismatch,
                "kappa needs two equal-length, non-empty vote lists (got " +
                    std::to_string(votes_a.size()) + " and " + std::to_string(votes_b.size()) + ")");
  const double n = static_cast<double>(votes_a.size());
  std::array<double, kNumLabels> ma{}, mb{};
  double agree = 0.0;
  for (std::size_t i = 0; i < votes_a.size(); ++i) {
    ma[index_of(votes_a[i])] += 1.0;
    mb[index_of(votes_b[i])] += 1.0;
    if (votes_a[i] == votes_b[i]) agree += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) p_e += (ma[k] / n) * (mb[k] / n);
  if (p_e >= 1.0) return 1.0;  // both raters constant and identical
  return (p_o - p_e) / (1.0 - p_e);
}

// --- annotation data --------------------------------------------------------

nlohmann::json to_json(const AnnotationVote& v) {
  return {{"record_id", v.record_id},
          {"object_surface", v.object_surface},
          {"annotator_id", v.annotator_id},
          {"label", std::string(to_string(v.label))},
          {"timestamp", v.timestamp}};
}

AnnotationVote vote_from_json(const nlohmann::json& j) {
  AnnotationVote v;
  v.record_id = j.at("record_id").get<std::string>();
  v.object_surface = j.at("object_surface").get<std::string>();
  v.annotator_id = j.at("annotator_id").get<std::string>();
  auto l = parse_label(j.at("label").get<std::string>());
  if (!l) throw Error(ErrorCode::InvalidLabel, "vote label '" + j.at("label").get<std::string>() + "'");
  v.label = *l;
  v.timestamp = j.at("timestamp").get<std::int64_t>();
  return v;
}

nlohmann::json to_json(const AnnotationItem& item) {
  nlohmann::json j;
  j["record"] = to_json(item.record);
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : item.candidates) {
    j["candidates"].push_back({{"surface", c.surface},
                               {"char_start", byte_to_codepoint_offset(item.record.text, c.char_start)},
                               {"char_end", byte_to_codepoint_offset(item.record.text, c.char_end)}});
  }
  return j;
}

AnnotationItem item_from_json(const nlohmann::json& j) {
  AnnotationItem item;
  item.record = record_from_json(j.at("record"));
  for (const auto& c : j.at("candidates")) {
    ExplicitObject o;
    o.surface = c.at("surface").get<std::string>();
    o.char_start = codepoint_to_byte_offset(item.record.text, c.at("char_start").get<std::size_t>());
    o.char_end = codepoint_to_byte_offset(item.record.text, c.at("char_end").get<std::size_t>());
    item.candidates.push_back(std::move(o));
  }
  return item;
}

std::vector<AnnotationItem> build_annotation_batch(std::span<const StanceRecord> records,
                                                   const Tagger& tagger,
                                                   const ExtractionOptions& opts) {
  std::vector<AnnotationItem> out;
  for (const auto& r : records) {
    if (opts.polar_only && r.label == StanceLabel::None) continue;
    if (detect_explicit_mention(r.text, r.target)) continue;
    const auto tokens = tagger.tag(r.text);
    const auto cands = extract_candidates(r.text, tokens);
    auto objects = filter_candidates(cands, tokens, opts.filter);
    if (objects.empty()) continue;
    // one candidate per distinct surface; votes are keyed by surface
    std::unordered_set<std::string> seen;
    std::vector<ExplicitObject> unique;
    for (auto& o : objects)
      if (seen.insert(o.surface).second) unique.push_back(std::move(o));
    out.push_back(AnnotationItem{r, std::move(unique)});
  }
  return out;
}

std::map<ObjectKey, std::map<std::string, StanceLabel>> latest_votes(
    std::span<const AnnotationVote> votes) {
  std::map<ObjectKey, std::map<std::string, std::pair<std::int64_t, StanceLabel>>> latest;
  for (const auto& v : votes) {
    auto& slot = latest[{v.record_id, v.object_surface}];
    auto it = slot.find(v.annotator_id);
    // equal timestamps: the later log entry supersedes
    if (it == slot.end() || v.timestamp >= it->second.first)
      slot[v.annotator_id] = {v.timestamp, v.label};
  }
  std::map<ObjectKey, std::map<std::string, StanceLabel>> out;
  for (const auto& [key, per_annotator] : latest)
    for (const auto& [annotator, tl] : per_annotator) out[key][annotator] = tl.second;
  return out;
}

std::map<ObjectKey, StanceLabel> resolve_votes(std::span<const AnnotationVote> votes) {
  std::map<ObjectKey, StanceLabel> out;
  for (const auto& [key, per_annotator] : latest_votes(votes)) {
    std::array<std::size_t, kNumLabels> counts{};
    for (const auto& [_, label] : per_annotator) ++counts[index_of(label)];
    const auto best = std::max_element(counts.begin(), counts.end());
    if (std::count(counts.begin(), counts.end(), *best) > 1) continue;  // tie
    out[key] = kAllLabels[static_cast<std::size_t>(best - counts.begin())];
  }
  return out;
}

}  // namespace stance::enrich
