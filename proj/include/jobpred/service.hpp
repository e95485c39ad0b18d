#pragma once

// HTTP JSON prediction service.
//
//   POST /predict  {"text": "...", "top_k": 3}
//   GET  /labels
//   GET  /health
//
// Request handling is split from transport: PredictionService maps request
// bodies to (status, JSON) pairs, HttpServer binds them to cpp-httplib.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#endif
#include <httplib.h>
#include <json.hpp>

#include "jobpred/ensemble.hpp"

namespace jobpred {

inline constexpr std::size_t kMaxTextChars = 100000;

/// A single model or a voting ensemble behind one interface.
class Predictor {
 public:
  static std::shared_ptr<const Predictor> from_bundle(std::shared_ptr<const ModelBundle> bundle) {
    return from_ensemble(EnsembleSpec::of({std::move(bundle)}));
  }

  static std::shared_ptr<const Predictor> from_ensemble(EnsembleSpec spec) {
    spec.validate();
    auto p = std::shared_ptr<Predictor>(new Predictor());
    if (spec.size() == 1) {
      p->identifier_ = spec.members[0]->identifier;
    } else {
      Fnv1a h;
      for (const auto& m : spec.members) h.update(m->identifier + "\n");
      h.update(std::to_string(spec.fallback_member_index));
      p->identifier_ = "ensemble-" + hex64(h.digest());
    }
    p->spec_ = std::move(spec);
    return p;
  }

  Prediction predict(const std::vector<std::string>& tokens) const { return ensemble_predict_tokens(spec_, tokens); }
  const LabelRegistry& labels() const { return spec_.labels(); }
  const std::string& identifier() const { return identifier_; }
  std::size_t max_len() const { return spec_.members.front()->config.max_len; }
  const EnsembleSpec& spec() const { return spec_; }

 private:
  Predictor() = default;
  EnsembleSpec spec_;
  std::string identifier_;
};

/// Loads a checkpoint directory, or an ensemble manifest file, or several
/// checkpoint directories (ensemble in the given order).
inline std::shared_ptr<const Predictor> load_predictor(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw InputError("no model given");
  if (paths.size() == 1) {
    if (is_ensemble_manifest(paths[0])) return Predictor::from_ensemble(load_ensemble(paths[0]));
    return Predictor::from_bundle(std::make_shared<const ModelBundle>(load_checkpoint(paths[0])));
  }
  std::vector<std::shared_ptr<const ModelBundle>> members;
  for (const auto& p : paths) members.push_back(std::make_shared<const ModelBundle>(load_checkpoint(p)));
  return Predictor::from_ensemble(EnsembleSpec::of(std::move(members)));
}

struct PredictionResult {
  std::size_t label_id = 0;
  std::string label_name;
  std::vector<std::pair<std::size_t, double>> scores;  // (label id, probability), descending
  std::string model_identifier;
  std::size_t tokens_before_truncation = 0;
  std::size_t tokens_after_truncation = 0;

  nlohmann::json to_json(const LabelRegistry& labels) const {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& [id, p] : scores) s.push_back({{"label", labels.name(id)}, {"label_id", id}, {"probability", p}});
    return {{"label_id", label_id},
            {"label_name", label_name},
            {"scores", s},
            {"model_identifier", model_identifier},
            {"preprocessing",
             {{"tokens_before_truncation", tokens_before_truncation},
              {"tokens_after_truncation", tokens_after_truncation}}}};
  }
};

/// Preprocess, encode and predict; scores sorted by probability, ties by id.
inline PredictionResult predict_text(const Predictor& predictor, std::string_view text,
                                     std::optional<std::size_t> top_k = std::nullopt) {
  const auto tokens = preprocess(text);
  const Prediction p = predictor.predict(tokens);
  PredictionResult r;
  r.label_id = p.label_id;
  r.label_name = predictor.labels().name(p.label_id);
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) r.scores.emplace_back(i, p.probabilities[i]);
  std::stable_sort(r.scores.begin(), r.scores.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (top_k && *top_k < r.scores.size()) r.scores.resize(*top_k);
  r.model_identifier = predictor.identifier();
  r.tokens_before_truncation = tokens.size();
  r.tokens_after_truncation = std::min(tokens.size(), predictor.max_len());
  return r;
}

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

namespace detail {

inline ServiceResponse error_response(int status, std::string message) {
  return {status, {{"error", std::move(message)}}};
}

inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace detail

class PredictionService {
 public:
  PredictionService() : started_(std::chrono::steady_clock::now()) {}

  void set_predictor(std::shared_ptr<const Predictor> p) {
    std::lock_guard lock(mu_);
    predictor_ = std::move(p);
  }

  std::shared_ptr<const Predictor> predictor() const {
    std::lock_guard lock(mu_);
    return predictor_;
  }

  ServiceResponse handle_predict(std::string_view body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return detail::error_response(400, "request body is not valid JSON");
    }
    if (!req.is_object() || !req.contains("text")) return detail::error_response(422, "missing field \"text\"");
    if (!req["text"].is_string()) return detail::error_response(422, "\"text\" must be a string");
    std::optional<std::size_t> top_k;
    if (req.contains("top_k") && !req["top_k"].is_null()) {
      if (!req["top_k"].is_number_integer() || req["top_k"].get<long long>() < 1) {
        return detail::error_response(422, "\"top_k\" must be a positive integer");
      }
      top_k = req["top_k"].get<std::size_t>();
    }
    const auto& text = req["text"].get_ref<const std::string&>();
    if (detail::utf8_length(text) > kMaxTextChars) {
      return detail::error_response(413, "text exceeds " + std::to_string(kMaxTextChars) + " characters");
    }
    auto p = predictor();
    if (!p) return detail::error_response(503, "model not loaded");
    return {200, predict_text(*p, text, top_k).to_json(p->labels())};
  }

  ServiceResponse handle_labels() const {
    auto p = predictor();
    if (!p) return detail::error_response(503, "model not loaded");
    return {200, {{"labels", p->labels().names()}}};
  }

  ServiceResponse handle_health() const {
    auto p = predictor();
    const double uptime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    if (!p) return {503, {{"status", "loading"}, {"model_identifier", nullptr}, {"uptime", uptime}}};
    return {200, {{"status", "ok"}, {"model_identifier", p->identifier()}, {"uptime", uptime}}};
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Predictor> predictor_;
  std::chrono::steady_clock::time_point started_;
};

struct ServerOptions {
  std::string cors_origin = "*";
};

/// cpp-httplib transport for a PredictionService.
class HttpServer {
 public:
  explicit HttpServer(PredictionService& service, ServerOptions options = {})
      : service_(service), options_(std::move(options)) {
    auto reply = [this](httplib::Response& res, const ServiceResponse& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server_.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                                 {"Access-Control-Allow-Headers", "Content-Type"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server_.set_payload_max_length(16 * 1024 * 1024);
    server_.Post("/predict", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, service_.handle_predict(req.body));
    });
    server_.Get("/labels", [this, reply](const httplib::Request&, httplib::Response& res) {
      reply(res, service_.handle_labels());
    });
    server_.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) {
      reply(res, service_.handle_health());
    });
    server_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      reply(res, detail::error_response(500, msg));
    });
  }

  ~HttpServer() { stop(); }

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw InputError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  /// Serves on a background thread until stop().
  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void run() { server_.listen_after_bind(); }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  PredictionService& service_;
  ServerOptions options_;
  httplib::Server server_;
  std::thread thread_;
};

/// Splits "host:port"; a bare port binds 0.0.0.0.
inline std::pair<std::string, int> parse_bind(std::string_view s) {
  const auto colon = s.rfind(':');
  std::string host = colon == std::string_view::npos ? "0.0.0.0" : std::string(s.substr(0, colon));
  const std::string_view port_str = colon == std::string_view::npos ? s : s.substr(colon + 1);
  int port = -1;
  const auto [ptr, ec] = std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
  if (ec != std::errc() || ptr != port_str.data() + port_str.size() || port < 0 || port > 65535 || host.empty()) {
    throw InputError("bad bind address \"" + std::string(s) + "\" (expected host:port)");
  }
  return {host, port};
}

}  // namespace jobpred
