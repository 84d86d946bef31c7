#pragma once

#include <nlohmann/json.hpp>

#include <csignal>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "lithoseg/cli/run.hpp"
#include "lithoseg/coarse/bootstrap.hpp"
#include "lithoseg/coarse/curation.hpp"
#include "lithoseg/imgcore/io.hpp"
#include "lithoseg/synthgen/corpus.hpp"

#include <httplib.h>

namespace lithoseg::cli {

struct ReviewItem {
  std::string id;
  fs::path sem;
  fs::path mask;
};

// Curation state of one bootstrap iteration that is waiting for a human.
// Masks and images are only read; decisions are the only thing written.
class ReviewSession {
 public:
  explicit ReviewSession(const Run& run) {
    const auto awaiting = run.coarse_dir() / "awaiting.json";
    require_file(awaiting);
    const auto a = read_json_file(awaiting);
    iteration_ = a.at("iteration").get<int>();
    const auto dir = coarse::iteration_dir(run.coarse_dir(), iteration_);
    decisions_path_ = dir / "decisions.jsonl";
    const auto corpus = run.corpus_dir();
    require_file(corpus / "manifest.json");
    for (const auto& e : synth::read_manifest(corpus)) {
      if (e.split != "train") continue;
      ReviewItem it{e.id, synth::sample_dir(corpus, e) / "sem.png", dir / "masks" / (e.id + ".png")};
      require_file(it.sem);
      require_file(it.mask);
      index_[it.id] = items_.size();
      items_.push_back(std::move(it));
    }
  }

  int iteration() const { return iteration_; }
  const std::vector<ReviewItem>& items() const { return items_; }
  const fs::path& decisions_path() const { return decisions_path_; }

  const ReviewItem* find(const std::string& id) const {
    const auto f = index_.find(id);
    return f == index_.end() ? nullptr : &items_[f->second];
  }

  std::map<std::string, coarse::CurationDecision> decisions() const {
    std::lock_guard lock(mu_);
    return coarse::read_decisions(decisions_path_);
  }

  enum class PostResult { Recorded, UnknownId, AlreadyDecided };

  PostResult decide(const std::string& id, bool accepted, bool overwrite) {
    if (!find(id)) return PostResult::UnknownId;
    std::lock_guard lock(mu_);
    const auto current = coarse::read_decisions(decisions_path_);
    if (current.count(id) && !overwrite) return PostResult::AlreadyDecided;
    coarse::append_decision(decisions_path_, {id, accepted, coarse::DecisionSource::Human, coarse::now_iso8601()});
    return PostResult::Recorded;
  }

  nlohmann::json progress() const {
    const auto d = decisions();
    int accepted = 0, rejected = 0;
    for (const auto& it : items_) {
      const auto f = d.find(it.id);
      if (f == d.end()) continue;
      (f->second.accepted ? accepted : rejected) += 1;
    }
    const int total = static_cast<int>(items_.size());
    return {{"iteration", iteration_},
            {"total", total},
            {"decided", accepted + rejected},
            {"accepted", accepted},
            {"rejected", rejected},
            {"remaining", total - accepted - rejected}};
  }

  nlohmann::json list() const {
    const auto d = decisions();
    nlohmann::json out = nlohmann::json::array();
    for (const auto& it : items_) {
      const auto f = d.find(it.id);
      const std::string status = f == d.end() ? "undecided" : (f->second.accepted ? "accepted" : "rejected");
      out.push_back({{"id", it.id},
                     {"image", "/api/items/" + it.id + "/image"},
                     {"overlay", "/api/items/" + it.id + "/overlay"},
                     {"decision", status}});
    }
    return out;
  }

 private:
  int iteration_ = 0;
  fs::path decisions_path_;
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t> index_;
  mutable std::mutex mu_;
};

inline void json_reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Registers the review endpoints on `server`.
inline void install_review_routes(httplib::Server& server, ReviewSession& session, const fs::path& ui_dir) {
  server.Get("/api/items", [&](const httplib::Request&, httplib::Response& res) { json_reply(res, 200, session.list()); });

  server.Get("/api/progress",
             [&](const httplib::Request&, httplib::Response& res) { json_reply(res, 200, session.progress()); });

  server.Get(R"(/api/items/([^/]+)/image)", [&](const httplib::Request& req, httplib::Response& res) {
    const auto* it = session.find(req.matches[1]);
    if (!it) return json_reply(res, 404, {{"error", "unknown item"}});
    const auto bytes = img::detail::read_file(it->sem);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  });

  // Rendered from the current mask file on every request.
  server.Get(R"(/api/items/([^/]+)/overlay)", [&](const httplib::Request& req, httplib::Response& res) {
    const auto* it = session.find(req.matches[1]);
    if (!it) return json_reply(res, 404, {{"error", "unknown item"}});
    const auto sem = img::load_image(it->sem);
    const auto mask = img::load_mask(it->mask);
    const auto png = img::encode_png(sem.width(), sem.height(), 3, img::overlay_rgb(sem, mask));
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  });

  server.Post(R"(/api/items/([^/]+)/decision)", [&](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!session.find(id)) return json_reply(res, 404, {{"error", "unknown item"}});
    bool accepted = false;
    try {
      const auto body = nlohmann::json::parse(req.body);
      accepted = body.at("accepted").get<bool>();
    } catch (const nlohmann::json::exception&) {
      return json_reply(res, 400, {{"error", "body must be {\"accepted\": true|false}"}});
    }
    const bool overwrite = req.has_param("overwrite") && req.get_param_value("overwrite") == "true";
    switch (session.decide(id, accepted, overwrite)) {
      case ReviewSession::PostResult::UnknownId:
        return json_reply(res, 404, {{"error", "unknown item"}});
      case ReviewSession::PostResult::AlreadyDecided:
        return json_reply(res, 409, {{"error", "already decided; repeat with ?overwrite=true to replace"}});
      case ReviewSession::PostResult::Recorded:
        return json_reply(res, 200, {{"id", id}, {"decision", accepted ? "accepted" : "rejected"}});
    }
  });

  if (!ui_dir.empty() && fs::is_directory(ui_dir)) {
    server.set_mount_point("/", ui_dir.string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("lithoseg review API: GET /api/items, GET /api/progress, POST /api/items/<id>/decision\n",
                      "text/plain");
    });
  }
}

// Serves until SIGINT or SIGTERM. The signals are blocked in every thread
// and collected by a dedicated waiter that stops the server.
inline int serve_review(const Run& run, const std::string& host, int port, const fs::path& ui_dir) {
  ReviewSession session(run);
  httplib::Server server;
  install_review_routes(server, session, ui_dir);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    log_info("review-serve: signal " + std::to_string(sig) + ", shutting down");
    server.stop();
  });

  if (!server.bind_to_port(host, port)) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw IoError("review-serve: cannot bind " + host + ":" + std::to_string(port));
  }
  log_info("review-serve: iteration " + std::to_string(session.iteration()) + ", " +
           std::to_string(session.items().size()) + " items on http://" + host + ":" + std::to_string(port));
  server.listen_after_bind();
  // Releases the waiter when the server stopped without a signal.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace lithoseg::cli
