#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <regex>
#include <unordered_map>


#include <httplib.h>

#include "marshal/backends.hpp"

namespace marshal {

namespace {

class MockTransport final : public Transport {
public:
    MockTransport(BackendSpec spec, BackendContext ctx) : spec_(std::move(spec)), ctx_(std::move(ctx)) {
        for (const auto& rule : spec_.script) {
            patterns_.emplace_back(rule.regex ? std::optional<std::regex>(std::regex(rule.match)) : std::nullopt);
        }
    }

    std::string send(const ModelRequest& request) override {
        const std::string haystack = request.flattened_text();
        for (std::size_t i = 0; i < spec_.script.size(); ++i) {
            const auto& rule = spec_.script[i];
            const bool hit = patterns_[i] ? std::regex_search(haystack, *patterns_[i])
                                          : haystack.find(rule.match) != std::string::npos;
            if (!hit) continue;

            if (rule.delay_ms > 0) {
                if (rule.delay_ms >= spec_.timeout_ms) {
                    ctx_.sleep(std::chrono::milliseconds(spec_.timeout_ms));
                    throw BackendError(Errc::Timeout, "mock '" + spec_.id + "' exceeded its timeout");
                }
                ctx_.sleep(std::chrono::milliseconds(rule.delay_ms));
            }
            if (rule.fault && should_fault(i, rule)) {
                const int status = *rule.fault == Errc::RateLimited   ? 429
                                   : *rule.fault == Errc::ServerError ? 503
                                   : *rule.fault == Errc::ClientError ? 400
                                                                      : 0;
                throw BackendError(*rule.fault, "mock '" + spec_.id + "' injected " + std::string(to_string(*rule.fault)),
                                   1, status);
            }
            return rule.reply;
        }
        throw BackendError(Errc::ScriptMiss, "mock '" + spec_.id + "' has no rule matching the request");
    }

private:
    bool should_fault(std::size_t rule_index, const MockRule& rule) {
        if (rule.fault_times < 0) return true;
        std::lock_guard lock(mu_);
        int& seen = fault_counts_[rule_index];
        if (seen >= rule.fault_times) return false;
        ++seen;
        return true;
    }

    BackendSpec spec_;
    BackendContext ctx_;
    std::vector<std::optional<std::regex>> patterns_;
    std::mutex mu_;
    std::unordered_map<std::size_t, int> fault_counts_;
};

struct Endpoint {
    std::string scheme_host_port;
    std::string path;
};

Endpoint parse_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
        throw Error(Errc::ConfigError, "invalid endpoint URL: " + url);
    }
    return Endpoint{m[1].str(), m[2].matched ? m[2].str() : std::string("/v1/chat/completions")};
}

class HttpChatTransport final : public Transport {
public:
    HttpChatTransport(BackendSpec spec, BackendContext ctx)
        : spec_(std::move(spec)), ctx_(std::move(ctx)), endpoint_(parse_endpoint(spec_.endpoint_or_command)) {}

    std::string send(const ModelRequest& request) override {
        httplib::Headers headers;
        if (!spec_.api_key_ref.empty()) {
            auto key = ctx_.getenv(spec_.api_key_ref);
            if (!key || key->empty()) {
                throw BackendError(Errc::MissingCredential,
                                   "backend '" + spec_.id + "': environment variable " + spec_.api_key_ref + " is not set");
            }
            headers.emplace("Authorization", "Bearer " + *key);
        }

        httplib::Client client(endpoint_.scheme_host_port);
        const auto timeout = std::chrono::milliseconds(spec_.timeout_ms);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        const std::string body = chat_request_body(spec_.model_name, request).dump();
        auto res = client.Post(endpoint_.path, headers, body, "application/json");
        if (!res) {
            const auto err = res.error();
            if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
                throw BackendError(Errc::Timeout, "backend '" + spec_.id + "': " + httplib::to_string(err));
            }
            throw BackendError(Errc::ServerError, "backend '" + spec_.id + "': " + httplib::to_string(err));
        }
        const int status = res->status;
        if (status == 429) {
            throw BackendError(Errc::RateLimited, "backend '" + spec_.id + "': HTTP 429", 1, status);
        }
        if (status >= 500) {
            throw BackendError(Errc::ServerError, "backend '" + spec_.id + "': HTTP " + std::to_string(status), 1, status);
        }
        if (status >= 400) {
            throw BackendError(Errc::ClientError, "backend '" + spec_.id + "': HTTP " + std::to_string(status), 1, status);
        }
        return chat_response_text(res->body);
    }

private:
    BackendSpec spec_;
    BackendContext ctx_;
    Endpoint endpoint_;
};

class Fd {
public:
    explicit Fd(int fd = -1) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    [[nodiscard]] int get() const noexcept { return fd_; }

private:
    int fd_;
};

// Runs `/bin/sh -c <command>`, writes the request document to stdin and
// returns stdout with trailing whitespace trimmed.
class LocalCommandTransport final : public Transport {
public:
    explicit LocalCommandTransport(BackendSpec spec) : spec_(std::move(spec)) {
        // A child that exits without draining stdin must not kill the caller.
        static const bool ignore_sigpipe = [] {
            ::signal(SIGPIPE, SIG_IGN);
            return true;
        }();
        (void)ignore_sigpipe;
    }

    std::string send(const ModelRequest& request) override {
        const std::string input = command_request_body(request).dump() + "\n";
        int in_pipe[2];
        int out_pipe[2];
        if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw io_error("pipe");
        if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            throw io_error("pipe");
        }
        Fd child_stdin(in_pipe[1]);
        Fd child_stdout(out_pipe[0]);

        const pid_t pid = ::fork();
        if (pid < 0) {
            ::close(in_pipe[0]);
            ::close(out_pipe[1]);
            throw io_error("fork");
        }
        if (pid == 0) {
            ::dup2(in_pipe[0], STDIN_FILENO);
            ::dup2(out_pipe[1], STDOUT_FILENO);
            ::execl("/bin/sh", "sh", "-c", spec_.endpoint_or_command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        ::fcntl(child_stdin.get(), F_SETFL, O_NONBLOCK);

        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(spec_.timeout_ms);
        std::string output;
        std::size_t written = 0;
        bool stdout_open = true;
        char buf[4096];
        while (stdout_open) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                ::kill(pid, SIGKILL);
                ::waitpid(pid, nullptr, 0);
                throw BackendError(Errc::Timeout, "backend '" + spec_.id + "': command timed out");
            }
            pollfd fds[2] = {{child_stdout.get(), POLLIN, 0}, {child_stdin.get(), POLLOUT, 0}};
            const nfds_t n = child_stdin.get() >= 0 ? 2 : 1;
            const int rc = ::poll(fds, n, static_cast<int>(left.count()));
            if (rc < 0 && errno != EINTR) break;
            if (n == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
                const ssize_t w = ::write(child_stdin.get(), input.data() + written, input.size() - written);
                if (w > 0) written += static_cast<std::size_t>(w);
                if (w < 0 && errno != EAGAIN) written = input.size();
                if (written >= input.size()) child_stdin.reset();
            }
            if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
                const ssize_t r = ::read(child_stdout.get(), buf, sizeof buf);
                if (r > 0) {
                    output.append(buf, static_cast<std::size_t>(r));
                } else if (r == 0 || errno != EAGAIN) {
                    stdout_open = false;
                }
            }
        }
        int status = 0;
        ::waitpid(pid, &status, 0);
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
            throw BackendError(Errc::ServerError, "backend '" + spec_.id + "': command exited with status " +
                                                      std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
        }
        while (!output.empty() && std::isspace(static_cast<unsigned char>(output.back()))) output.pop_back();
        return output;
    }

private:
    BackendError io_error(const char* what) const {
        return BackendError(Errc::ServerError, "backend '" + spec_.id + "': " + what + " failed: " + std::strerror(errno));
    }

    BackendSpec spec_;
};

}  // namespace

std::unique_ptr<Transport> make_transport(const BackendSpec& spec, const BackendContext& ctx) {
    switch (spec.kind) {
        case BackendKind::HttpChat: return std::make_unique<HttpChatTransport>(spec, ctx);
        case BackendKind::LocalCommand: return std::make_unique<LocalCommandTransport>(spec);
        case BackendKind::Mock: return std::make_unique<MockTransport>(spec, ctx);
    }
    throw Error(Errc::ConfigError, "unknown backend kind");
}

}  // namespace marshal
