#pragma once

#include "sqforge/config.hpp"
#include "sqforge/pipeline.hpp"

#include <json.hpp>

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace sqforge {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string structure_checkpoint;
  std::string appearance_checkpoint;
  std::string dataset;  // default dataset for /api/sweep
  int max_concurrent = 1;
  int queue_capacity = 16;
  std::string out_dir = "forge-out";

  static ServerConfig from(const Config& cfg);
  void validate() const;
};

/// One JSON object per line on stderr.
void log_event(const std::string& event, nlohmann::json fields = nlohmann::json::object());

enum class JobStatus { Queued, Running, Done, Error };
std::string_view job_status_name(JobStatus s);

/// FIFO job table with a fixed worker pool. Terminal states never change.
class JobQueue {
 public:
  using Work = std::function<nlohmann::json(const ProgressFn&)>;

  JobQueue(int workers, int capacity);
  ~JobQueue();

  /// Returns the new job id, or an empty string when the queue is full.
  std::string submit(std::string kind, Work work);
  /// Job snapshot {id, kind, status, progress:{done,total}, result?, error?}; null if unknown.
  std::optional<nlohmann::json> snapshot(const std::string& id) const;
  /// Blocks until the job reaches a terminal state.
  void wait(const std::string& id) const;

 private:
  struct Job {
    std::string id, kind;
    JobStatus status = JobStatus::Queued;
    int done = 0, total = 0;
    nlohmann::json result;
    std::string error;
    Work work;
  };
  void worker();

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> pending_;
  std::vector<std::thread> threads_;
  int capacity_;
  long next_id_ = 1;
  bool stop_ = false;
};

/// HTTP JSON API over loaded models.
class Service {
 public:
  explicit Service(ServerConfig cfg);
  ~Service();

  /// Blocks serving until stop().
  void run();
  /// Binds to a free port on host and serves in a background thread; returns the port.
  int start_background();
  void stop();

  const Models& models() const { return models_; }
  JobQueue& jobs() { return *jobs_; }

 private:
  void install_routes();

  ServerConfig cfg_;
  Models models_;
  std::unique_ptr<JobQueue> jobs_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::mutex err_mu_;
  long next_error_ = 1;
};

}  // namespace sqforge
