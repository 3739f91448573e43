#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "probekit/common.hpp"
#include "probekit/prompt.hpp"
#include "probekit/surgeon.hpp"

namespace probekit {

struct BenchResult {
    std::string runner_id;
    int64_t peak_memory_bytes = 0;
    double avg_ms_per_sample = 0.0;
    double throughput_sps = 0.0;
    int batch_size = 1;
    int warmup_iters = 0;
    int measured_iters = 0;
    std::string device = "cpu";
};

inline bool throughput_consistent(const BenchResult& r) {
    if (r.batch_size != 1) return true;
    if (r.throughput_sps <= 0.0) return false;
    return std::fabs(r.throughput_sps - 1000.0 / r.avg_ms_per_sample) / r.throughput_sps <= 0.10;
}

class BenchRunner {
public:
    virtual ~BenchRunner() = default;
    virtual std::string id() const = 0;
    virtual void run(const std::vector<std::string>& batch) = 0;
};

class PipelineRunner final : public BenchRunner {
public:
    PipelineRunner(std::string id, const TruncatedPipeline& pipeline)
        : id_(std::move(id)), pipeline_(pipeline) {}
    std::string id() const override { return id_; }
    void run(const std::vector<std::string>& batch) override { classify(pipeline_, batch); }

private:
    std::string id_;
    const TruncatedPipeline& pipeline_;
};

class PromptRunner final : public BenchRunner {
public:
    PromptRunner(std::string id, ChatGenerator& generator, TemplateId template_id,
                 int max_new_tokens = 0)
        : id_(std::move(id)),
          generator_(generator),
          template_id_(template_id),
          max_new_tokens_(max_new_tokens > 0 ? max_new_tokens
                                             : default_max_new_tokens(template_id)) {}
    std::string id() const override { return id_; }
    void run(const std::vector<std::string>& batch) override {
        const PromptTemplate& tpl = get_template(template_id_);
        for (const auto& text : batch)
            generator_.generate(render_prompt(tpl, text), max_new_tokens_);
    }

private:
    std::string id_;
    ChatGenerator& generator_;
    TemplateId template_id_;
    int max_new_tokens_;
};

// Wraps a callable plus whatever state its closure owns; lets factories build
// self-contained runners inside the benchmark child process.
class LambdaRunner final : public BenchRunner {
public:
    LambdaRunner(std::string id, std::function<void(const std::vector<std::string>&)> fn)
        : id_(std::move(id)), fn_(std::move(fn)) {}
    std::string id() const override { return id_; }
    void run(const std::vector<std::string>& batch) override { fn_(batch); }

private:
    std::string id_;
    std::function<void(const std::vector<std::string>&)> fn_;
};

// Fixed cost per sample; its sleep parameter is the timing oracle in tests.
class SleepStubRunner final : public BenchRunner {
public:
    explicit SleepStubRunner(double ms_per_sample) : ms_per_sample_(ms_per_sample) {}
    std::string id() const override { return "sleep_stub"; }
    void run(const std::vector<std::string>& batch) override {
        const auto ns = static_cast<int64_t>(ms_per_sample_ * 1e6 * batch.size());
        std::this_thread::sleep_for(std::chrono::nanoseconds(ns));
    }

private:
    double ms_per_sample_;
};

// Peak resident set of the calling process, in bytes (VmHWM); 0 if unreadable.
inline int64_t read_peak_rss_bytes() {
    FILE* f = std::fopen("/proc/self/status", "rb");
    if (!f) return 0;
    char line[256];
    int64_t bytes = 0;
    while (std::fgets(line, sizeof(line), f)) {
        long long kb = 0;
        if (std::sscanf(line, "VmHWM: %lld kB", &kb) == 1) {
            bytes = kb * 1024;
            break;
        }
    }
    std::fclose(f);
    return bytes;
}

using RunnerFactory = std::function<std::unique_ptr<BenchRunner>()>;

// The factory runs inside a forked child so the runner's weights and buffers
// are resident only there; VmHWM deltas between children stay comparable.
inline BenchResult measure_efficiency(const RunnerFactory& factory,
                                      const std::vector<std::string>& sample, int warmup,
                                      int iters, int batch_size = 1,
                                      const std::string& device = "cpu") {
    if (iters < 10) throw std::invalid_argument("iters must be >= 10");
    if (warmup < 2) throw std::invalid_argument("warmup must be >= 2");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (sample.empty()) throw EmptyDataset("benchmark sample is empty");
    if (device != "cpu") throw DeviceUnavailable("device not available: " + device);

    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe() failed");
    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork() failed");

    if (pid == 0) {
        close(fds[0]);
        double payload[2] = {0.0, 0.0};  // [total measured ms, peak bytes]
        try {
            std::unique_ptr<BenchRunner> runner = factory();
            const auto take_batch = [&](int iter) {
                std::vector<std::string> batch;
                for (int b = 0; b < batch_size; ++b)
                    batch.push_back(sample[(static_cast<size_t>(iter) * batch_size + b) %
                                           sample.size()]);
                return batch;
            };
            for (int i = 0; i < warmup; ++i) runner->run(take_batch(i));
            const auto t0 = std::chrono::steady_clock::now();
            for (int i = 0; i < iters; ++i) runner->run(take_batch(warmup + i));
            const auto t1 = std::chrono::steady_clock::now();
            payload[0] = std::chrono::duration<double, std::milli>(t1 - t0).count();
            payload[1] = static_cast<double>(read_peak_rss_bytes());
        } catch (...) {
            close(fds[1]);
            _exit(3);
        }
        ssize_t n = write(fds[1], payload, sizeof(payload));
        close(fds[1]);
        _exit(n == sizeof(payload) ? 0 : 2);
    }

    close(fds[1]);
    double payload[2] = {0.0, 0.0};
    size_t got = 0;
    while (got < sizeof(payload)) {
        const ssize_t n = read(fds[0], reinterpret_cast<char*>(payload) + got,
                               sizeof(payload) - got);
        if (n <= 0) break;
        got += static_cast<size_t>(n);
    }
    close(fds[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    if (got != sizeof(payload) || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw std::runtime_error("benchmark child failed");

    BenchResult result;
    result.peak_memory_bytes = static_cast<int64_t>(payload[1]);
    result.batch_size = batch_size;
    result.warmup_iters = warmup;
    result.measured_iters = iters;
    result.device = device;
    const double total_ms = payload[0];
    const double samples = static_cast<double>(iters) * batch_size;
    result.avg_ms_per_sample = total_ms / samples;
    result.throughput_sps = samples / (total_ms / 1000.0);
    return result;
}

inline BenchResult measure_efficiency(const RunnerFactory& factory,
                                      const std::vector<std::string>& sample, int warmup,
                                      int iters, int batch_size, const std::string& device,
                                      const std::string& runner_id) {
    BenchResult r = measure_efficiency(factory, sample, warmup, iters, batch_size, device);
    r.runner_id = runner_id;
    return r;
}

struct ReferenceRow {
    std::string label;
    int64_t peak_memory_bytes = 0;
    double avg_ms_per_sample = 0.0;
    double throughput_sps = 0.0;
};

// Plain-text table in the order peak memory, avg time per sample, throughput;
// reference rows (matched by position) add ratio columns.
inline std::string compare_report(const std::vector<BenchResult>& results,
                                  const std::vector<ReferenceRow>& references = {}) {
    const bool with_refs = !references.empty();
    std::string out = "runner,peak_memory_mb,avg_ms_per_sample,throughput_sps";
    if (with_refs) out += ",reference,memory_ratio,time_ratio,throughput_ratio";
    out += "\n";
    for (size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        out += strfmt("%s,%.2f,%.3f,%.3f", r.runner_id.c_str(),
                      static_cast<double>(r.peak_memory_bytes) / (1024.0 * 1024.0),
                      r.avg_ms_per_sample, r.throughput_sps);
        if (with_refs) {
            const auto& ref = references[std::min(i, references.size() - 1)];
            out += strfmt(",%s,%.4f,%.4f,%.4f", ref.label.c_str(),
                          static_cast<double>(r.peak_memory_bytes) /
                              static_cast<double>(ref.peak_memory_bytes),
                          r.avg_ms_per_sample / ref.avg_ms_per_sample,
                          r.throughput_sps / ref.throughput_sps);
        }
        out += "\n";
    }
    return out;
}

}  // namespace probekit
