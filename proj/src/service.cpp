#include "stance/service.hpp"

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stance/rng.hpp"

namespace stance::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kLogFile = "events.jsonl";
constexpr const char* kSnapshotFile = "snapshot.json";
constexpr const char* kBatchFile = "batch.jsonl";

std::vector<std::size_t> build_queue(std::size_t n, const AssignmentConfig& cfg, std::size_t slot) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (cfg.mode == AssignmentMode::FullOverlap) return order;
  Rng rng(cfg.seed);
  rng.shuffle(order);
  const auto shared = static_cast<std::size_t>(cfg.overlap_fraction * static_cast<double>(n));
  const std::size_t rest = n - shared;
  const std::size_t parts = std::max<std::size_t>(1, cfg.partitions);
  const std::size_t k = slot % parts;
  std::vector<std::size_t> queue(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shared));
  const std::size_t lo = shared + k * rest / parts;
  const std::size_t hi = shared + (k + 1) * rest / parts;
  queue.insert(queue.end(), order.begin() + static_cast<std::ptrdiff_t>(lo),
               order.begin() + static_cast<std::ptrdiff_t>(hi));
  return queue;
}

// Surfaces of `item` the annotator has voted on.
std::set<std::string> voted_surfaces(const State& s, const std::string& annotator,
                                     const std::string& record_id) {
  std::set<std::string> out;
  for (const auto& lv : s.votes)
    if (lv.vote.annotator_id == annotator && lv.vote.record_id == record_id)
      out.insert(lv.vote.object_surface);
  return out;
}

bool item_complete(const State& s, const std::string& annotator, const enrich::AnnotationItem& item) {
  const auto done = voted_surfaces(s, annotator, item.record.id);
  for (const auto& c : item.candidates)
    if (!done.count(c.surface)) return false;
  return true;
}

Session& session_at(State& s, const std::string& id) {
  auto it = s.sessions.find(id);
  if (it == s.sessions.end()) throw Error(ErrorCode::FormatError, "log refers to unknown session " + id);
  return it->second;
}

void apply_event(State& s, const json& ev, const std::vector<enrich::AnnotationItem>& batch,
                 const AssignmentConfig& assignment) {
  const auto seq = ev.at("seq").get<std::uint64_t>();
  if (seq != s.seq + 1)
    throw Error(ErrorCode::FormatError,
                "event log out of sequence: expected " + std::to_string(s.seq + 1) + ", got " +
                    std::to_string(seq));
  const auto type = ev.at("type").get<std::string>();
  const auto time = ev.at("time").get<std::int64_t>();
  if (type == "session") {
    Session sess;
    sess.id = ev.at("session_id").get<std::string>();
    sess.annotator_id = ev.at("annotator_id").get<std::string>();
    auto [slot, fresh] = s.annotator_slots.emplace(sess.annotator_id, s.annotator_slots.size());
    (void)fresh;
    sess.queue = build_queue(batch.size(), assignment, slot->second);
    sess.created = sess.updated = time;
    s.sessions[sess.id] = std::move(sess);
    ++s.next_session;
  } else if (type == "serve") {
    auto& sess = session_at(s, ev.at("session_id").get<std::string>());
    const auto item = ev.at("item").get<std::size_t>();
    if (item >= batch.size()) throw Error(ErrorCode::FormatError, "log serves unknown item");
    sess.pending = item;
    sess.cursor = ev.at("cursor").get<std::size_t>();
    ++sess.served;
    sess.updated = time;
    s.served[sess.annotator_id].insert(item);
  } else if (type == "vote") {
    auto& sess = session_at(s, ev.at("session_id").get<std::string>());
    auto vote = enrich::vote_from_json(ev.at("vote"));
    const enrich::AnnotationItem* item = nullptr;
    for (const auto& it : batch)
      if (it.record.id == vote.record_id) item = &it;
    if (!item) throw Error(ErrorCode::FormatError, "log votes on unknown record " + vote.record_id);
    const bool was_complete = item_complete(s, sess.annotator_id, *item);
    s.votes.push_back({sess.id, std::move(vote)});
    ++sess.votes;
    if (!was_complete && item_complete(s, sess.annotator_id, *item)) ++sess.completed_items;
    sess.updated = time;
  } else {
    throw Error(ErrorCode::FormatError, "unknown event type '" + type + "'");
  }
  s.seq = seq;
}

json session_json(const Session& s) {
  return {{"id", s.id},
          {"annotator_id", s.annotator_id},
          {"queue", s.queue},
          {"cursor", s.cursor},
          {"pending", s.pending ? json(*s.pending) : json(nullptr)},
          {"served", s.served},
          {"completed_items", s.completed_items},
          {"votes", s.votes},
          {"created", s.created},
          {"updated", s.updated}};
}

Session session_from_json(const json& j) {
  Session s;
  s.id = j.at("id").get<std::string>();
  s.annotator_id = j.at("annotator_id").get<std::string>();
  s.queue = j.at("queue").get<std::vector<std::size_t>>();
  s.cursor = j.at("cursor").get<std::size_t>();
  if (!j.at("pending").is_null()) s.pending = j.at("pending").get<std::size_t>();
  s.served = j.at("served").get<std::size_t>();
  s.completed_items = j.at("completed_items").get<std::size_t>();
  s.votes = j.at("votes").get<std::size_t>();
  s.created = j.at("created").get<std::int64_t>();
  s.updated = j.at("updated").get<std::int64_t>();
  return s;
}

// Reads the state directory; returns the state and the byte length of the
// well-formed log prefix.
std::pair<State, std::uintmax_t> load_state(const fs::path& dir,
                                             const std::vector<enrich::AnnotationItem>& batch,
                                             const AssignmentConfig& assignment) {
  State s;
  if (fs::exists(dir / kSnapshotFile)) {
    std::ifstream in(dir / kSnapshotFile);
    std::stringstream ss;
    ss << in.rdbuf();
    s = state_from_json(json::parse(ss.str()));
  }
  std::uintmax_t good = 0;
  if (!fs::exists(dir / kLogFile)) return {s, good};
  std::ifstream in(dir / kLogFile, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail: no terminating newline
    const std::string line = content.substr(pos, nl - pos);
    json ev;
    try {
      ev = json::parse(line);
    } catch (const json::exception&) {
      if (nl + 1 >= content.size()) break;  // garbled final line
      throw Error(ErrorCode::FormatError, "corrupt event log line at byte " + std::to_string(pos));
    }
    if (ev.at("seq").get<std::uint64_t>() > s.seq) apply_event(s, ev, batch, assignment);
    pos = nl + 1;
    good = pos;
  }
  return {s, good};
}

json item_json(const State& s, const enrich::AnnotationItem& item, std::size_t index,
               const std::string& annotator) {
  json j = enrich::to_json(item);
  const auto done = voted_surfaces(s, annotator, item.record.id);
  for (auto& c : j["candidates"]) c["voted"] = done.count(c["surface"].get<std::string>()) > 0;
  j["index"] = index;
  return j;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw Error(ErrorCode::FileUnreadable, "cannot write " + tmp.string());
  std::fwrite(content.data(), 1, content.size(), f);
  std::fflush(f);
  ::fsync(fileno(f));
  std::fclose(f);
  fs::rename(tmp, path);
}

}  // namespace

nlohmann::json to_json(const AssignmentConfig& c) {
  return {{"mode", c.mode == AssignmentMode::FullOverlap ? "full_overlap" : "partitioned"},
          {"partitions", c.partitions},
          {"overlap_fraction", c.overlap_fraction},
          {"seed", c.seed}};
}

AssignmentConfig assignment_from_json(const nlohmann::json& j) {
  AssignmentConfig c;
  const auto mode = j.value("mode", std::string("full_overlap"));
  if (mode == "full_overlap") c.mode = AssignmentMode::FullOverlap;
  else if (mode == "partitioned") c.mode = AssignmentMode::Partitioned;
  else throw Error(ErrorCode::ConfigError, "assignment mode must be full_overlap or partitioned");
  c.partitions = j.value("partitions", c.partitions);
  c.overlap_fraction = j.value("overlap_fraction", c.overlap_fraction);
  c.seed = j.value("seed", c.seed);
  if (c.partitions == 0) throw Error(ErrorCode::ConfigError, "partitions must be >= 1");
  if (!(c.overlap_fraction >= 0.0 && c.overlap_fraction <= 1.0))
    throw Error(ErrorCode::ConfigError, "overlap_fraction must be in [0, 1]");
  return c;
}

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

nlohmann::json to_json(const State& s) {
  json j;
  j["seq"] = s.seq;
  j["next_session"] = s.next_session;
  j["sessions"] = json::array();
  for (const auto& [_, sess] : s.sessions) j["sessions"].push_back(session_json(sess));
  j["served"] = json::object();
  for (const auto& [annotator, items] : s.served) j["served"][annotator] = items;
  j["annotator_slots"] = s.annotator_slots;
  j["votes"] = json::array();
  for (const auto& lv : s.votes)
    j["votes"].push_back({{"session_id", lv.session_id}, {"vote", enrich::to_json(lv.vote)}});
  return j;
}

State state_from_json(const nlohmann::json& j) {
  State s;
  s.seq = j.at("seq").get<std::uint64_t>();
  s.next_session = j.at("next_session").get<std::uint64_t>();
  for (const auto& sj : j.at("sessions")) {
    auto sess = session_from_json(sj);
    s.sessions[sess.id] = std::move(sess);
  }
  for (const auto& [annotator, items] : j.at("served").items())
    s.served[annotator] = items.get<std::set<std::size_t>>();
  s.annotator_slots = j.at("annotator_slots").get<std::map<std::string, std::size_t>>();
  for (const auto& vj : j.at("votes"))
    s.votes.push_back({vj.at("session_id").get<std::string>(), enrich::vote_from_json(vj.at("vote"))});
  return s;
}

State replay(const fs::path& state_dir, const std::vector<enrich::AnnotationItem>& batch,
             const AssignmentConfig& assignment) {
  return load_state(state_dir, batch, assignment).first;
}

std::vector<enrich::AnnotationItem> read_batch(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read batch " + path.string());
  std::vector<enrich::AnnotationItem> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      out.push_back(enrich::item_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

void write_batch(const std::vector<enrich::AnnotationItem>& batch, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::string content;
  for (const auto& item : batch) content += enrich::to_json(item).dump() + "\n";
  write_file_atomic(path, content);
}

// --- service -------------------------------------------------------------------

AnnotationService::AnnotationService(ServiceOptions options, std::vector<enrich::AnnotationItem> batch)
    : options_(std::move(options)) {
  if (options_.state_dir.empty()) throw Error(ErrorCode::ConfigError, "service needs a state directory");
  fs::create_directories(options_.state_dir);
  const fs::path batch_path = options_.state_dir / kBatchFile;
  if (fs::exists(batch_path)) {
    batch_ = read_batch(batch_path);
    if (!batch.empty() && batch != batch_)
      throw Error(ErrorCode::ConfigError,
                  "state directory holds a different enrichment batch: " + batch_path.string());
  } else {
    if (batch.empty()) throw Error(ErrorCode::PreconditionViolated, "service needs an enrichment batch");
    batch_ = std::move(batch);
    write_batch(batch_, batch_path);
  }
  for (std::size_t i = 0; i < batch_.size(); ++i) {
    if (!item_index_.emplace(batch_[i].record.id, i).second)
      throw Error(ErrorCode::FormatError, "duplicate record id in batch: " + batch_[i].record.id);
  }

  auto [state, good] = load_state(options_.state_dir, batch_, options_.assignment);
  snapshot_seq_ = state.seq;
  const fs::path log_path = options_.state_dir / kLogFile;
  if (fs::exists(log_path) && fs::file_size(log_path) != good) fs::resize_file(log_path, good);
  state_ = std::make_shared<const State>(std::move(state));
  log_ = std::fopen(log_path.c_str(), "ab");
  if (!log_) throw Error(ErrorCode::FileUnreadable, "cannot open event log " + log_path.string());
}

AnnotationService::~AnnotationService() {
  if (log_) std::fclose(log_);
}

std::shared_ptr<const State> AnnotationService::snapshot() const { return std::atomic_load(&state_); }

void AnnotationService::commit(json event) {
  const auto current = std::atomic_load(&state_);
  event["seq"] = current->seq + 1;
  auto next = std::make_shared<State>(*current);
  apply_event(*next, event, batch_, options_.assignment);
  const std::string line = event.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() || std::fflush(log_) != 0)
    throw Error(ErrorCode::FileUnreadable, "event log write failed");
  ::fsync(fileno(log_));
  std::atomic_store(&state_, std::shared_ptr<const State>(std::move(next)));
  if (options_.snapshot_every > 0 && state_->seq - snapshot_seq_ >= options_.snapshot_every)
    write_snapshot();
}

void AnnotationService::write_snapshot() {
  const auto s = snapshot();
  write_file_atomic(options_.state_dir / kSnapshotFile, to_json(*s).dump());
  snapshot_seq_ = s->seq;
}

json AnnotationService::create_session(const std::string& annotator_id) {
  if (annotator_id.empty()) throw Error(ErrorCode::FormatError, "annotator_id must be non-empty");
  std::lock_guard lock(writer_);
  const std::string id = "s" + std::to_string(snapshot()->next_session);
  commit({{"type", "session"}, {"session_id", id}, {"annotator_id", annotator_id},
          {"time", options_.clock()}});
  const auto s = snapshot();
  const auto& sess = s->sessions.at(id);
  return {{"session_id", id}, {"annotator_id", annotator_id}, {"created", sess.created},
          {"queue_size", sess.queue.size()}};
}

json AnnotationService::next_item(const std::string& session_id) {
  std::lock_guard lock(writer_);
  auto s = snapshot();
  auto it = s->sessions.find(session_id);
  if (it == s->sessions.end()) throw Error(ErrorCode::UnknownSession, "unknown session " + session_id);
  const Session& sess = it->second;
  if (sess.pending && !item_complete(*s, sess.annotator_id, batch_[*sess.pending]))
    return {{"done", false}, {"item", item_json(*s, batch_[*sess.pending], *sess.pending, sess.annotator_id)}};
  const auto served_it = s->served.find(sess.annotator_id);
  for (std::size_t pos = sess.cursor; pos < sess.queue.size(); ++pos) {
    const std::size_t idx = sess.queue[pos];
    if (served_it != s->served.end() && served_it->second.count(idx)) continue;
    commit({{"type", "serve"}, {"session_id", session_id}, {"item", idx}, {"cursor", pos + 1},
            {"time", options_.clock()}});
    s = snapshot();
    return {{"done", false}, {"item", item_json(*s, batch_[idx], idx, sess.annotator_id)}};
  }
  return {{"done", true}};
}

json AnnotationService::submit_vote(const std::string& session_id, const json& body) {
  if (!body.is_object()) throw Error(ErrorCode::FormatError, "vote body must be a JSON object");
  std::lock_guard lock(writer_);
  const auto s = snapshot();
  auto it = s->sessions.find(session_id);
  if (it == s->sessions.end()) throw Error(ErrorCode::UnknownSession, "unknown session " + session_id);
  const Session& sess = it->second;
  for (const char* key : {"record_id", "object_surface", "label"})
    if (!body.contains(key) || !body[key].is_string())
      throw Error(ErrorCode::FormatError, std::string("vote needs string field '") + key + "'");
  const auto label = parse_label(body["label"].get<std::string>());
  if (!label) throw Error(ErrorCode::InvalidLabel, "invalid label '" + body["label"].get<std::string>() + "'");
  const auto record_id = body["record_id"].get<std::string>();
  const auto surface = body["object_surface"].get<std::string>();
  auto idx_it = item_index_.find(record_id);
  if (idx_it == item_index_.end()) throw Error(ErrorCode::UnknownItem, "unknown record " + record_id);
  const auto& item = batch_[idx_it->second];
  const bool is_candidate = std::any_of(item.candidates.begin(), item.candidates.end(),
                                        [&](const ExplicitObject& o) { return o.surface == surface; });
  if (!is_candidate)
    throw Error(ErrorCode::UnknownItem, "'" + surface + "' is not a candidate object of " + record_id);
  const auto served_it = s->served.find(sess.annotator_id);
  if (served_it == s->served.end() || !served_it->second.count(idx_it->second))
    throw Error(ErrorCode::PreconditionViolated, "record " + record_id + " has not been served to " + sess.annotator_id);
  const bool supersede = body.value("supersede", false);
  if (!supersede && voted_surfaces(*s, sess.annotator_id, record_id).count(surface))
    throw Error(ErrorCode::DuplicateVote,
                sess.annotator_id + " already voted on '" + surface + "' in " + record_id);

  enrich::AnnotationVote vote{record_id, surface, sess.annotator_id, *label, options_.clock()};
  commit({{"type", "vote"}, {"session_id", session_id}, {"vote", enrich::to_json(vote)},
          {"time", vote.timestamp}});
  json alignment = nullptr;
  try {
    alignment = to_int(derive_alignment(*label, item.record.label));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedAlignment) throw;
  }
  const auto after = snapshot();
  return {{"vote", enrich::to_json(vote)},
          {"session_id", session_id},
          {"target_label", to_string(item.record.label)},
          {"alignment", alignment},
          {"item_complete", item_complete(*after, sess.annotator_id, item)}};
}

json AnnotationService::progress(const std::string& session_id) const {
  const auto s = snapshot();
  auto it = s->sessions.find(session_id);
  if (it == s->sessions.end()) throw Error(ErrorCode::UnknownSession, "unknown session " + session_id);
  const Session& sess = it->second;
  const auto served_it = s->served.find(sess.annotator_id);
  std::size_t remaining = 0;
  for (auto idx : sess.queue)
    if (served_it == s->served.end() || !served_it->second.count(idx)) ++remaining;
  return {{"session_id", sess.id},          {"annotator_id", sess.annotator_id},
          {"queue_size", sess.queue.size()}, {"served", sess.served},
          {"completed_items", sess.completed_items}, {"votes", sess.votes},
          {"remaining", remaining},          {"updated", sess.updated}};
}

json AnnotationService::agreement() const {
  const auto s = snapshot();
  std::vector<enrich::AnnotationVote> votes;
  std::set<std::string> annotators;
  for (const auto& lv : s->votes) {
    votes.push_back(lv.vote);
    annotators.insert(lv.vote.annotator_id);
  }
  const auto latest = enrich::latest_votes(votes);
  json pairs = json::array();
  double sum = 0.0;
  for (auto a = annotators.begin(); a != annotators.end(); ++a) {
    for (auto b = std::next(a); b != annotators.end(); ++b) {
      std::vector<StanceLabel> la, lb;
      for (const auto& [key, per] : latest) {
        auto ia = per.find(*a), ib = per.find(*b);
        if (ia == per.end() || ib == per.end()) continue;
        la.push_back(ia->second);
        lb.push_back(ib->second);
      }
      if (la.empty()) continue;
      const double k = enrich::cohen_kappa(la, lb);
      sum += k;
      pairs.push_back({{"annotator_a", *a}, {"annotator_b", *b}, {"shared_items", la.size()}, {"kappa", k}});
    }
  }
  return {{"pairs", pairs},
          {"mean_kappa", pairs.empty() ? json(nullptr) : json(sum / static_cast<double>(pairs.size()))}};
}

json AnnotationService::export_records() const {
  const auto s = snapshot();
  std::vector<enrich::AnnotationVote> votes;
  for (const auto& lv : s->votes) votes.push_back(lv.vote);
  const auto resolved = enrich::resolve_votes(votes);
  json records = json::array();
  std::size_t no_pair = 0, unlabeled = 0;
  for (const auto& item : batch_) {
    std::vector<ExplicitObject> labeled;
    for (auto obj : item.candidates) {
      auto it = resolved.find({item.record.id, obj.surface});
      if (it == resolved.end()) continue;
      obj.label = it->second;
      labeled.push_back(std::move(obj));
    }
    if (labeled.empty()) {
      ++unlabeled;
      continue;
    }
    try {
      const auto er = enrich::propose_adversarial_pair(item.record, labeled);
      if (!validate_enriched(er).empty()) continue;
      records.push_back(to_json(er));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoDisalignedObject && e.code() != ErrorCode::PreconditionViolated) throw;
      ++no_pair;
    }
  }
  return {{"records", records}, {"without_pair", no_pair}, {"unresolved", unlabeled}};
}

json AnnotationService::state_json() const { return to_json(*snapshot()); }

nlohmann::json error_body(const Error& e) {
  return {{"error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}}};
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownItem: return 404;
    case ErrorCode::DuplicateVote: return 409;
    case ErrorCode::InvalidLabel:
    case ErrorCode::FormatError: return 400;
    case ErrorCode::PreconditionViolated: return 422;
    default: return 500;
  }
}

}  // namespace stance::service
