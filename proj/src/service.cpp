#include "sqforge/service.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <filesystem>

namespace sqforge {

using nlohmann::json;

ServerConfig ServerConfig::from(const Config& cfg) {
  ServerConfig s;
  s.host = cfg.get("serve.host", s.host);
  s.port = cfg.get("serve.port", s.port);
  s.structure_checkpoint = cfg.get("serve.structure", s.structure_checkpoint);
  s.appearance_checkpoint = cfg.get("serve.appearance", s.appearance_checkpoint);
  s.dataset = cfg.get("serve.dataset", s.dataset);
  s.max_concurrent = cfg.get("serve.max_concurrent", s.max_concurrent);
  s.queue_capacity = cfg.get("serve.queue_capacity", s.queue_capacity);
  s.out_dir = cfg.get("serve.out_dir", s.out_dir);
  return s;
}

void ServerConfig::validate() const {
  require(!structure_checkpoint.empty(), "serve: a structure checkpoint is required");
  require(port >= 0 && port <= 65535, "serve: port must lie in [0, 65535]");
  require(max_concurrent >= 1, "serve: max_concurrent must be at least 1");
  require(queue_capacity >= 0, "serve: queue_capacity must be non-negative");
}

void log_event(const std::string& event, json fields) {
  static std::mutex mu;
  const auto now = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
  fields["event"] = event;
  fields["ts"] = now;
  const std::string line = fields.dump() + "\n";
  std::lock_guard<std::mutex> lock(mu);
  std::fputs(line.c_str(), stderr);
}

std::string_view job_status_name(JobStatus s) {
  switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Error: return "error";
  }
  return "unknown";
}

JobQueue::JobQueue(int workers, int capacity) : capacity_(capacity) {
  for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { worker(); });
}

JobQueue::~JobQueue() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

std::string JobQueue::submit(std::string kind, Work work) {
  std::lock_guard<std::mutex> lock(mu_);
  if (static_cast<int>(pending_.size()) >= capacity_) return "";
  auto job = std::make_shared<Job>();
  char buf[32];
  std::snprintf(buf, sizeof buf, "job-%06ld", next_id_++);
  job->id = buf;
  job->kind = std::move(kind);
  job->work = std::move(work);
  jobs_[job->id] = job;
  pending_.push_back(job);
  cv_.notify_all();
  return job->id;
}

std::optional<json> JobQueue::snapshot(const std::string& id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  const Job& j = *it->second;
  json out = {{"id", j.id},
              {"kind", j.kind},
              {"status", job_status_name(j.status)},
              {"progress", {{"done", j.done}, {"total", j.total}}}};
  if (j.status == JobStatus::Done) {
    out["result"] = j.result.value("result", json());
    if (j.result.contains("timings")) out["timings"] = j.result["timings"];
  }
  if (j.status == JobStatus::Error) out["error"] = j.error;
  return out;
}

void JobQueue::wait(const std::string& id) const {
  std::unique_lock<std::mutex> lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return;
  auto job = it->second;
  cv_.wait(lock, [&] { return job->status == JobStatus::Done || job->status == JobStatus::Error; });
}

void JobQueue::worker() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_.wait(lock, [&] { return stop_ || !pending_.empty(); });
      if (stop_ && pending_.empty()) return;
      job = pending_.front();
      pending_.pop_front();
      job->status = JobStatus::Running;
    }
    log_event("job_start", {{"job", job->id}, {"kind", job->kind}});
    ProgressFn progress = [this, job](int done, int total) {
      std::lock_guard<std::mutex> lock(mu_);
      if (done >= job->done) {
        job->done = done;
        job->total = total;
      }
    };
    json result;
    std::string error;
    try {
      result = job->work(progress);
    } catch (const std::exception& e) {
      error = e.what();
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (error.empty()) {
        job->result = std::move(result);
        job->status = JobStatus::Done;
        job->done = job->total;
      } else {
        job->error = error;
        job->status = JobStatus::Error;
      }
      job->work = nullptr;
    }
    cv_.notify_all();
    if (error.empty()) log_event("job_done", {{"job", job->id}});
    else log_event("job_error", {{"job", job->id}, {"error", error}});
  }
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json checkpoint_info(const Checkpoint& ck) {
  return {{"id", ck.id()},
          {"kind", net_kind_name(ck.kind)},
          {"T", ck.schedule.steps()},
          {"lambda", ck.schedule.lambda()},
          {"codec", {{"R", ck.codec.resolution()}, {"P", ck.codec.patch()}, {"G", ck.codec.coarse()}, {"C", ck.codec.channels()}}},
          {"parameters", ck.net->parameter_count()},
          {"iterations", ck.config.iterations},
          {"seed", ck.config.seed}};
}

}  // namespace

Service::Service(ServerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  models_ = Models::load(cfg_.structure_checkpoint, cfg_.appearance_checkpoint);
  jobs_ = std::make_unique<JobQueue>(cfg_.max_concurrent, cfg_.queue_capacity);
  server_ = std::make_unique<httplib::Server>();
  install_routes();
}

Service::~Service() {
  stop();
  jobs_.reset();
}

void Service::install_routes() {
  auto& srv = *server_;
  // Wraps a handler: validation errors become 400, anything else an opaque 500.
  auto guarded = [this](auto fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const RequestError& e) {
        reply(res, 400, {{"error", e.what()}, {"field", e.field()}});
      } catch (const json::exception& e) {
        reply(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
      } catch (const std::exception& e) {
        std::string id;
        {
          std::lock_guard<std::mutex> lock(err_mu_);
          char buf[32];
          std::snprintf(buf, sizeof buf, "err-%06ld", next_error_++);
          id = buf;
        }
        log_event("internal_error", {{"error_id", id}, {"path", req.path}, {"detail", e.what()}});
        reply(res, 500, {{"error", "internal error"}, {"error_id", id}});
      }
    };
  };
  auto json_body = [](const httplib::Request& req) {
    const std::string ct = req.get_header_value("Content-Type");
    if (ct.rfind("application/json", 0) != 0) throw RequestError("content-type", "must be application/json");
    return json::parse(req.body);
  };

  srv.Get("/api/health", guarded([this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"},
                     {"checkpoint_id", models_.structure.id()},
                     {"T", models_.schedule().steps()},
                     {"lambda", models_.schedule().lambda()}});
  }));

  srv.Get("/api/checkpoint", guarded([this](const httplib::Request&, httplib::Response& res) {
    json body = {{"structure", checkpoint_info(models_.structure)},
                 {"appearance", models_.appearance ? checkpoint_info(*models_.appearance) : json(nullptr)},
                 {"tau0_range", {0, models_.schedule().steps()}}};
    reply(res, 200, body);
  }));

  srv.Post("/api/generate", guarded([this, json_body](const httplib::Request& req, httplib::Response& res) {
    GenerateRequest gr = parse_generate_request(json_body(req), models_.schedule());
    if (gr.want_appearance && !models_.appearance)
      throw RequestError("want_appearance", "no appearance checkpoint is loaded");
    const std::string id = jobs_->submit("generate", [this, gr](const ProgressFn& progress) {
      GenerateOutput out = run_generate(models_, gr, progress);
      return json{{"result", generate_result_json(out, gr)}, {"timings", generate_timings_json(out)}};
    });
    if (id.empty()) {
      reply(res, 409, {{"error", "job queue is full"}});
      return;
    }
    log_event("generate_submitted", {{"job", id}, {"tau0", gr.tau0}, {"seed", gr.seed}});
    reply(res, 202, {{"job_id", id}, {"status", "queued"}});
  }));

  srv.Post("/api/sweep", guarded([this, json_body](const httplib::Request& req, httplib::Response& res) {
    const json body = json_body(req);
    if (!body.is_object()) throw RequestError("body", "must be a JSON object");
    const std::string dataset = body.value("dataset", cfg_.dataset);
    if (dataset.empty()) throw RequestError("dataset", "is required (no server default)");
    std::vector<int> taus;
    auto it = body.find("tau0s");
    if (it == body.end()) throw RequestError("tau0s", "is required");
    if (!it->is_array() || it->empty()) throw RequestError("tau0s", "must be a non-empty integer array");
    for (const auto& v : *it) {
      if (!v.is_number_integer()) throw RequestError("tau0s", "must be a non-empty integer array");
      const int tau = v.get<int>();
      if (tau < 0 || tau > models_.schedule().steps())
        throw RequestError("tau0s", "value " + std::to_string(tau) + " outside [0, " +
                                        std::to_string(models_.schedule().steps()) + "]");
      taus.push_back(tau);
    }
    const std::uint64_t seed = body.value("seed", std::uint64_t{0});
    const int limit = body.value("limit", 0);
    Dataset ds;
    try {
      ds = Dataset::load(dataset);
    } catch (const std::exception& e) {
      throw RequestError("dataset", e.what());
    }
    const std::string id = jobs_->submit("sweep", [this, ds, taus, seed, limit](const ProgressFn& progress) {
      TradeoffReport rep = run_sweep(models_, ds, taus, seed, limit, progress);
      json result = rep.to_json();
      result["csv"] = rep.to_csv();
      return json{{"result", result}};
    });
    if (id.empty()) {
      reply(res, 409, {{"error", "job queue is full"}});
      return;
    }
    reply(res, 202, {{"job_id", id}, {"status", "queued"}});
  }));

  srv.Get(R"(/api/jobs/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto snap = jobs_->snapshot(req.matches[1]);
    if (!snap) {
      reply(res, 404, {{"error", "unknown job"}});
      return;
    }
    reply(res, 200, *snap);
  }));

  srv.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    log_event("http", {{"method", req.method}, {"path", req.path}, {"status", res.status}});
  });
}

void Service::run() {
  log_event("serve", {{"host", cfg_.host}, {"port", cfg_.port}, {"checkpoint_id", models_.structure.id()}});
  require(server_->listen(cfg_.host, cfg_.port), "serve: cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));
}

int Service::start_background() {
  const int port = server_->bind_to_any_port(cfg_.host);
  require(port > 0, "serve: cannot bind " + cfg_.host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace sqforge
