#include "httplib.h"
#include "stance/service.hpp"

namespace stance::service {

using nlohmann::json;

struct HttpServer::Impl {
  AnnotationService& service;
  httplib::Server server;

  explicit Impl(AnnotationService& s) : service(s) {}

  template <class F>
  httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(f(req).dump(), "application/json");
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(error_body(e).dump(), "application/json");
      } catch (const json::exception& e) {
        const Error err(ErrorCode::FormatError, std::string("malformed JSON: ") + e.what());
        res.status = 400;
        res.set_content(error_body(err).dump(), "application/json");
      }
    };
  }
};

HttpServer::HttpServer(AnnotationService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  auto& svc = impl_->service;
  svr.Post("/api/v1/sessions", impl_->wrap([&svc](const httplib::Request& req) {
    const auto body = json::parse(req.body);
    if (!body.is_object() || !body.contains("annotator_id") || !body["annotator_id"].is_string())
      throw Error(ErrorCode::FormatError, "session body needs a string annotator_id");
    return svc.create_session(body["annotator_id"].get<std::string>());
  }));
  svr.Get(R"(/api/v1/sessions/([^/]+)/next)", impl_->wrap([&svc](const httplib::Request& req) {
    return svc.next_item(req.matches[1]);
  }));
  svr.Post(R"(/api/v1/sessions/([^/]+)/votes)", impl_->wrap([&svc](const httplib::Request& req) {
    return svc.submit_vote(req.matches[1], json::parse(req.body));
  }));
  svr.Get(R"(/api/v1/sessions/([^/]+)/progress)", impl_->wrap([&svc](const httplib::Request& req) {
    return svc.progress(req.matches[1]);
  }));
  svr.Get("/api/v1/agreement", impl_->wrap([&svc](const httplib::Request&) { return svc.agreement(); }));
  svr.Get("/api/v1/export", impl_->wrap([&svc](const httplib::Request&) { return svc.export_records(); }));
  svr.Get("/api/v1/state", impl_->wrap([&svc](const httplib::Request&) { return svc.state_json(); }));
  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    json body = {{"error", {{"code", "UnknownRoute"}, {"message", req.method + " " + req.path}}}};
    res.set_content(body.dump(), "application/json");
  });
}

HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpServer::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace stance::service
