#pragma once

#include <memory>
#include <string>

#include "common/error.hpp"
#include "service/triage_service.hpp"

namespace httplib {
class Server;
}

namespace derm {

// JSON-over-HTTP front end for a TriageService.
//
//   POST /cases                   multipart field "image" (or a raw image body)
//   GET  /cases?status=&cursor=&limit=
//   GET  /cases/{id}
//   GET  /cases/{id}/image
//   POST /cases/{id}/vetting      409 when the case already has a decision
//   POST /admin/incorporate
//   POST /admin/model             {"path": ...} or {"digest": ...}
//   GET  /health
class HttpApi {
 public:
  explicit HttpApi(TriageService& service);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();
  bool running() const;

  static int status_for(ErrorCode code);

 private:
  void install_routes();

  TriageService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace derm
