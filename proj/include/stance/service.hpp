#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "stance/enrich.hpp"

namespace stance::service {

enum class AssignmentMode { FullOverlap, Partitioned };

// Partitioned mode: a seeded permutation of the batch; the first
// floor(overlap_fraction * n) items go to everyone, the rest are split into
// `partitions` contiguous chunks. Annotators take chunks in order of first
// appearance, modulo the partition count.
struct AssignmentConfig {
  AssignmentMode mode = AssignmentMode::FullOverlap;
  std::size_t partitions = 4;
  double overlap_fraction = 0.2;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const AssignmentConfig& c);
AssignmentConfig assignment_from_json(const nlohmann::json& j);

using Clock = std::function<std::int64_t()>;  // milliseconds since epoch
Clock system_clock();

struct ServiceOptions {
  std::filesystem::path state_dir;
  AssignmentConfig assignment;
  std::size_t snapshot_every = 100;  // events between snapshots; 0 disables
  Clock clock = system_clock();
};

struct Session {
  std::string id;
  std::string annotator_id;
  std::vector<std::size_t> queue;  // batch indices in serving order
  std::size_t cursor = 0;          // next queue position to inspect
  std::optional<std::size_t> pending;
  std::size_t served = 0;
  std::size_t completed_items = 0;
  std::size_t votes = 0;
  std::int64_t created = 0;
  std::int64_t updated = 0;
};

struct LoggedVote {
  std::string session_id;
  enrich::AnnotationVote vote;
};

struct State {
  std::uint64_t seq = 0;  // events applied
  std::uint64_t next_session = 1;
  std::map<std::string, Session> sessions;
  std::map<std::string, std::set<std::size_t>> served;  // annotator -> batch items
  std::map<std::string, std::size_t> annotator_slots;   // order of first appearance
  std::vector<LoggedVote> votes;
};

// Canonical serialisation; equal states give identical bytes.
nlohmann::json to_json(const State& s);
State state_from_json(const nlohmann::json& j);

// Rebuilds the state from a state directory: latest snapshot, then every
// later log entry. A torn final log line is ignored.
State replay(const std::filesystem::path& state_dir, const std::vector<enrich::AnnotationItem>& batch,
             const AssignmentConfig& assignment);

std::vector<enrich::AnnotationItem> read_batch(const std::filesystem::path& path);
void write_batch(const std::vector<enrich::AnnotationItem>& batch, const std::filesystem::path& path);

// Annotation service core. One writer at a time appends to the event log and
// publishes a new immutable state; readers work on the published snapshot
// without taking the writer lock.
class AnnotationService {
 public:
  // Uses state_dir/batch.jsonl when present (the batch argument must then be
  // empty or identical); otherwise stores the given batch there.
  AnnotationService(ServiceOptions options, std::vector<enrich::AnnotationItem> batch);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  nlohmann::json create_session(const std::string& annotator_id);
  nlohmann::json next_item(const std::string& session_id);
  // body: record_id, object_surface, label, optional supersede (bool)
  nlohmann::json submit_vote(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json progress(const std::string& session_id) const;
  nlohmann::json agreement() const;
  nlohmann::json export_records() const;
  nlohmann::json state_json() const;

  std::shared_ptr<const State> snapshot() const;
  const std::vector<enrich::AnnotationItem>& batch() const { return batch_; }
  void write_snapshot();

 private:
  void commit(nlohmann::json event);

  ServiceOptions options_;
  std::vector<enrich::AnnotationItem> batch_;
  std::map<std::string, std::size_t> item_index_;
  std::mutex writer_;
  std::shared_ptr<const State> state_;
  std::FILE* log_ = nullptr;
  std::uint64_t snapshot_seq_ = 0;
};

// Error payload {"error": {"code", "message"}} and its HTTP status.
nlohmann::json error_body(const Error& e);
int http_status(ErrorCode code);

class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();
  // Blocks until stop(). Returns false when the address cannot be bound.
  bool listen(const std::string& host, int port);
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stance::service
