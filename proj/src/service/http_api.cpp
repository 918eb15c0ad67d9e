#include "service/http_api.hpp"

#include <httplib.h>

#include "common/error.hpp"
#include "common/text.hpp"

using nlohmann::json;

namespace derm {
namespace {

constexpr std::size_t kDefaultPageSize = 50;
constexpr std::size_t kMaxPageSize = 500;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

template <typename Handler>
auto guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, HttpApi::status_for(e.code()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

std::string content_type_for(const std::string& path) {
  const auto ext = text::lower(std::filesystem::path(path).extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".webp") return "image/webp";
  if (ext == ".tif") return "image/tiff";
  return "application/octet-stream";
}

}  // namespace

int HttpApi::status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kCorrupt: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kBackboneMismatch:
    case ErrorCode::kLabelOrderMismatch: return 422;
    case ErrorCode::kUnavailable: return 503;
    default: return 500;
  }
}

HttpApi::HttpApi(TriageService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpApi::serve() {
  server_->listen_after_bind();
  service_.store().flush();
}

void HttpApi::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

bool HttpApi::running() const { return server_->is_running(); }

void HttpApi::install_routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type, X-Vetter-Id"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  s.set_payload_max_length(64ull << 20);

  s.Post("/cases", guarded([this](const httplib::Request& req, httplib::Response& res) {
           std::string bytes;
           if (req.is_multipart_form_data()) {
             if (!req.has_file("image")) fail(ErrorCode::kInvalidArgument, "multipart upload lacks an 'image' field");
             bytes = req.get_file_value("image").content;
           } else {
             bytes = req.body;
           }
           const auto c = service_.submit_case(
               std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
           send_json(res, 201, to_json(c));
         }));

  s.Get("/cases", guarded([this](const httplib::Request& req, httplib::Response& res) {
          std::optional<CaseStatus> status;
          if (req.has_param("status")) {
            status = parse_case_status(req.get_param_value("status"));
            if (!status) fail(ErrorCode::kInvalidArgument, "unknown status filter");
          }
          const std::size_t cursor =
              req.has_param("cursor") ? static_cast<std::size_t>(text::parse_int(req.get_param_value("cursor"), "cursor")) : 0;
          std::size_t limit = kDefaultPageSize;
          if (req.has_param("limit")) {
            limit = static_cast<std::size_t>(text::parse_int(req.get_param_value("limit"), "limit"));
            limit = std::clamp<std::size_t>(limit, 1, kMaxPageSize);
          }
          const auto cases = service_.store().list(status);
          json items = json::array();
          for (std::size_t i = cursor; i < cases.size() && items.size() < limit; ++i) {
            const auto& c = cases[i];
            items.push_back({{"id", c.case_id},
                             {"thumbnail", "/cases/" + c.case_id + "/image"},
                             {"predicted_label", std::string(to_string(c.predicted_label))},
                             {"top3", ranked_scores_json(c.scores, 3)},
                             {"submitted_at", c.submitted_at},
                             {"status", std::string(to_string(c.status))}});
          }
          const std::size_t next = cursor + items.size();
          json body = {{"items", items},
                       {"depth", service_.store().count(CaseStatus::kPendingVetting)},
                       {"total", cases.size()}};
          body["next_cursor"] = next < cases.size() ? json(std::to_string(next)) : json(nullptr);
          send_json(res, 200, body);
        }));

  s.Get(R"(/cases/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto c = service_.store().get(req.matches[1]);
          if (!c) fail(ErrorCode::kNotFound, "unknown case " + std::string(req.matches[1]));
          send_json(res, 200, to_json(*c));
        }));

  s.Get(R"(/cases/([A-Za-z0-9_-]+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto path = service_.store().image_path(req.matches[1]).string();
          res.set_content(text::read_file(path), content_type_for(path));
        }));

  s.Post(R"(/cases/([A-Za-z0-9_-]+)/vetting)", guarded([this](const httplib::Request& req, httplib::Response& res) {
           auto decision = decision_from_json(parse_body(req));
           const std::string id = req.matches[1];
           if (!decision.case_id.empty() && decision.case_id != id) {
             fail(ErrorCode::kInvalidArgument, "case_id in body does not match the URL");
           }
           decision.case_id = id;
           if (decision.vetter_id.empty() && req.has_header("X-Vetter-Id")) {
             decision.vetter_id = req.get_header_value("X-Vetter-Id");
           }
           send_json(res, 200, to_json(service_.record_vetting(decision)));
         }));

  s.Post("/admin/incorporate", guarded([this](const httplib::Request&, httplib::Response& res) {
           const auto report = service_.incorporate_vetted();
           json added = json::array();
           for (const auto& [case_id, record_id] : report.incorporated) {
             added.push_back({{"case_id", case_id}, {"record_id", record_id}});
           }
           send_json(res, 200, {{"manifest", report.manifest.string()},
                                {"incorporated", added},
                                {"reconciled", report.reconciled},
                                {"count", report.incorporated.size()}});
         }));

  s.Post("/admin/model", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           ActiveModelInfo info;
           if (body.contains("path")) {
             info = service_.activate_checkpoint(body["path"].get<std::string>());
           } else if (body.contains("digest")) {
             info = service_.activate_digest(body["digest"].get<std::string>());
           } else {
             fail(ErrorCode::kInvalidArgument, "expected {\"path\": ...} or {\"digest\": ...}");
           }
           send_json(res, 200, {{"digest", info.digest}, {"network", info.network},
                                {"checkpoint", info.checkpoint.string()}});
         }));

  s.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) {
          const auto active = service_.active_model();
          json body = {{"status", active ? "ok" : "no_model"},
                       {"queue_depth", service_.store().count(CaseStatus::kPendingVetting)}};
          body["active_model_digest"] = active ? json(active->digest) : json(nullptr);
          body["active_model_network"] = active ? json(active->network) : json(nullptr);
          send_json(res, 200, body);
        }));
}

}  // namespace derm
