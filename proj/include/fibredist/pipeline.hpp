#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fibredist/artifacts.hpp"

namespace fibredist {

struct PipelineOptions {
    Backend backend = kDefaultBackend;
    // Manifest timestamp. Empty: SOURCE_DATE_EPOCH when set, else the current UTC time.
    std::string created_at;
    std::function<void(std::string_view stage)> on_stage;
};

// subset, nested CV, final fit, prediction, residual bootstrap, importance,
// SHAP, correlations, solvent recommendation, range check. Errors are
// rethrown with the failing stage prefixed to the message.
RunArtifacts run_pipeline(const std::vector<StudyRecord>& records, const std::string& fingerprint,
                          const RunRequest& request, const PipelineOptions& options = {});

// First 16 hex digits of SHA-256 over the canonical request and the dataset fingerprint.
std::string make_run_id(const RunRequest& request, const std::string& fingerprint);

std::string timestamp_now();

struct ModelCapability {
    ModelKind kind;
    bool available = true;
};

struct Capabilities {
    std::vector<std::string> polymers;
    std::vector<ModelCapability> models;
    std::string dataset_fingerprint;
    std::size_t rows = 0;
};

Capabilities list_capabilities(const std::vector<StudyRecord>& records);
std::string capabilities_json(const Capabilities& caps);

enum class RunState { queued, processing, done, failed };
std::string_view to_string(RunState state);

struct RunStatus {
    std::string run_id;
    RunState state = RunState::queued;
    std::string message;
    std::string stage;  // last pipeline stage entered
    std::string error_code;
};

std::string status_json(const RunStatus& status);

// Async job runner with a result cache keyed by run id. Each job captures the
// dataset snapshot current at submission, so a reload never changes a run in flight.
class RunService {
public:
    RunService(std::vector<StudyRecord> records, int workers = 1, PipelineOptions options = {});
    ~RunService();
    RunService(const RunService&) = delete;
    RunService& operator=(const RunService&) = delete;

    // Validates, then queues unless the same run id is already known. Returns the run id.
    std::string submit(const RunRequest& request);
    RunStatus status(const std::string& run_id) const;  // throws not_found

    // Throws not_found for unknown ids, invalid_argument while still running,
    // and the recorded error for failed runs.
    std::shared_ptr<const RunArtifacts> result(const std::string& run_id) const;

    // Blocks until the run is terminal.
    RunStatus wait(const std::string& run_id) const;

    std::shared_ptr<const RunArtifacts> run_sync(const RunRequest& request);

    void reload(std::vector<StudyRecord> records);
    Capabilities capabilities() const;
    RangeSummary range(const std::string& polymer) const;
    std::string fingerprint() const;
    std::size_t executed_runs() const;  // pipelines actually run, cache hits excluded

private:
    struct Dataset {
        std::vector<StudyRecord> records;
        std::string fingerprint;
    };
    struct Job {
        RunRequest request;
        std::shared_ptr<const Dataset> dataset;
        RunStatus status;
        std::shared_ptr<const RunArtifacts> artifacts;
        ErrorCode error = ErrorCode::internal;
    };

    void worker_loop();
    std::shared_ptr<const Dataset> snapshot() const;

    PipelineOptions options_;
    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::condition_variable queue_ready_;
    std::shared_ptr<const Dataset> dataset_;
    std::map<std::string, std::shared_ptr<Job>> jobs_;
    std::deque<std::string> queue_;
    std::vector<std::thread> workers_;
    std::size_t executed_ = 0;
    bool stopping_ = false;
};

}  // namespace fibredist

namespace fibredist {

std::string comparison_json(const DistComparison& c);

}  // namespace fibredist
