#pragma once

#include <functional>
#include <memory>
#include <string>

#include "fibredist/pipeline.hpp"

namespace fibredist {

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::string filename;  // set for downloads
};

// Returns the dataset to install on POST /api/admin/reload.
using DatasetLoader = std::function<std::vector<StudyRecord>()>;

// Socket-free dispatcher behind the HTTP server. Routes:
//   GET  /api/capabilities
//   GET  /api/range/{polymer}
//   POST /api/runs                  RunRequest JSON -> {"run_id": ...}, 202
//   GET  /api/runs/{id}/status
//   GET  /api/runs/{id}/result      409 until DONE
//   GET  /api/runs/{id}/report      zip bundle
//   POST /api/compare               {"a": [...], "b": [...]}
//   POST /api/admin/reload          only when a loader is given
// Errors are {"error": {"code": ..., "message": ...}}.
ApiResponse handle_api(RunService& service, const std::string& method, const std::string& path,
                       const std::string& body, const DatasetLoader& loader = {});

int http_status_for(ErrorCode code);
std::string error_json(std::string_view code, std::string_view message);

class HttpServer {
public:
    explicit HttpServer(RunService& service, DatasetLoader loader = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // port 0 picks a free port; returns the bound port or throws io_error.
    int bind(const std::string& host, int port);
    void listen();  // blocks until stop()
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace fibredist
