// Copyright 2026 The CloudSeed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cloudseed/http_server.hpp"

#include <httplib.h>

#include "cloudseed/error.hpp"
#include "cloudseed/json_io.hpp"

namespace cloudseed::server
{
namespace
{

constexpr const char * kJson = "application/json";

int status_of(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::kUnauthorized: return 401;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kState:
    case ErrorKind::kIncompleteBatch: return 409;
    case ErrorKind::kPoolExhausted: return 503;
    case ErrorKind::kParameter:
    case ErrorKind::kParse: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response & res, int status, const nlohmann::json & body)
{
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response & res, int status, const std::string & kind, const std::string & message)
{
  send_json(res, status, {{"error", kind}, {"message", message}});
}

std::string bearer_token(const httplib::Request & req)
{
  const auto header = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (header.size() > prefix.size() && header.compare(0, prefix.size(), prefix) == 0) {
    return header.substr(prefix.size());
  }
  return {};
}

nlohmann::json parse_body(const httplib::Request & req)
{
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error & e) {
    throw Error(ErrorKind::kParse, std::string("request body is not JSON: ") + e.what());
  }
}

workflow::SceneSubmission parse_submission(const nlohmann::json & body, Category category)
{
  try {
    workflow::SceneSubmission s;
    s.elapsed = body.at("elapsed").get<double>();
    for (const auto & c : body.at("clicks")) {
      segmentation::Click click;
      click.position = {c.at("x").get<double>(), c.at("y").get<double>(), c.at("z").get<double>()};
      click.timestamp_ms = c.value("timestamp_ms", std::int64_t{0});
      click.category = c.contains("category") ? c.at("category").get<Category>() : category;
      if (!click.position.finite()) {
        throw Error(ErrorKind::kParameter, "click position must be finite");
      }
      s.clicks.push_back(click);
    }
    return s;
  } catch (const nlohmann::json::exception & e) {
    throw Error(ErrorKind::kParameter, std::string("malformed submission: ") + e.what());
  }
}

}  // namespace

struct HttpServer::Impl
{
  AnnotationService & service;
  httplib::Server server;

  explicit Impl(AnnotationService & s) : service(s) {}

  template <typename F>
  static void guarded(httplib::Response & res, F && body)
  {
    try {
      body();
    } catch (const Error & e) {
      send_error(res, status_of(e.kind()), std::string(to_string(e.kind())), e.what());
    } catch (const std::exception & e) {
      send_error(res, 500, "internal", e.what());
    }
  }

  void routes()
  {
    server.Post("/session", [this](const httplib::Request & req, httplib::Response & res) {
      guarded(res, [&] {
        const auto body = parse_body(req);
        if (!body.is_object() || !body.contains("annotator_id") || !body.at("annotator_id").is_string()) {
          throw Error(ErrorKind::kParameter, "annotator_id is required");
        }
        const auto created = service.create_session(body.at("annotator_id").get<std::string>());
        send_json(res, 201, {{"token", created.token}, {"state", created.state}});
      });
    });
    server.Get("/session/state", [this](const httplib::Request & req, httplib::Response & res) {
      guarded(res, [&] { send_json(res, 200, service.state(bearer_token(req))); });
    });
    server.Get("/scene/next", [this](const httplib::Request & req, httplib::Response & res) {
      guarded(res, [&] { send_json(res, 200, nlohmann::json(service.next_scene(bearer_token(req)))); });
    });
    server.Get(R"(/scene/([0-9a-f]+)/cloud)", [this](const httplib::Request & req, httplib::Response & res) {
      guarded(res, [&] {
        const auto bytes = service.scene_payload(bearer_token(req), req.matches[1]);
        res.status = 200;
        res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
      });
    });
    server.Post(R"(/scene/([0-9a-zA-Z_\-]+)/clicks)", [this](const httplib::Request & req, httplib::Response & res) {
      guarded(res, [&] {
        const auto token = bearer_token(req);
        const auto category = service.state(token).at("category").get<Category>();
        const auto submission = parse_submission(parse_body(req), category);
        send_json(res, 200, service.submit(token, req.matches[1], submission));
      });
    });
    server.Get("/review", [this](const httplib::Request & req, httplib::Response & res) {
      guarded(res, [&] { send_json(res, 200, service.review(bearer_token(req))); });
    });
  }
};

HttpServer::HttpServer(AnnotationService & service) : impl_(std::make_unique<Impl>(service))
{
  impl_->routes();
}

HttpServer::~HttpServer()
{
  stop();
}

int HttpServer::bind(const std::string & host, int port)
{
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) {
      throw Error(ErrorKind::kIo, "cannot bind " + host);
    }
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen()
{
  impl_->server.listen_after_bind();
}

void HttpServer::stop()
{
  if (impl_) {
    impl_->server.stop();
  }
}

void HttpServer::wait_until_ready() const
{
  impl_->server.wait_until_ready();
}

}  // namespace cloudseed::server
