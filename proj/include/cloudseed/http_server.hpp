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

#ifndef CLOUDSEED__HTTP_SERVER_HPP_
#define CLOUDSEED__HTTP_SERVER_HPP_

#include <memory>
#include <string>

#include "cloudseed/service.hpp"

namespace cloudseed::server
{

/// HTTP/1.1 JSON front end of an AnnotationService.
///
///   POST /session              {"annotator_id"} -> 201 {"token", "state"}
///   GET  /session/state        -> state
///   GET  /scene/next           -> scene descriptor
///   GET  /scene/{id}/cloud     -> CSPC bytes, application/octet-stream
///   POST /scene/{id}/clicks    {"clicks": [{"x","y","z","timestamp_ms"?}], "elapsed"} -> outcome
///   GET  /review               -> review of the last training scene
///
/// Session calls carry "Authorization: Bearer <token>". Errors return {"error", "message"} with
/// 400 (malformed request), 401 (unknown token), 404 (no such resource), 409 (out of order)
/// or 503 (annotation pool exhausted).
class HttpServer
{
public:
  explicit HttpServer(AnnotationService & service);
  ~HttpServer();
  HttpServer(const HttpServer &) = delete;
  HttpServer & operator=(const HttpServer &) = delete;

  /// Binds `host:port`; port 0 picks a free port. Returns the bound port. Throws kIo.
  int bind(const std::string & host, int port);

  /// Serves until stop(); call after bind.
  void listen();
  void stop();
  void wait_until_ready() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cloudseed::server

#endif  // CLOUDSEED__HTTP_SERVER_HPP_
