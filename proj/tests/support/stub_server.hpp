#pragma once

// Local HTTP stub speaking the completion and embedding wire format, with
// switchable failure modes.

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace stub {

enum class Mode { ok, unavailable, flaky, slow, malformed, not_found, dim_change, zero_vector };

class Server {
public:
    Server() {
        srv_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
            if (fail(res)) return;
            const auto body = nlohmann::json::parse(req.body);
            {
                std::lock_guard lock(mu_);
                last_completion_ = body;
                last_auth_ = req.get_header_value("Authorization");
            }
            nlohmann::json out = {{"text", completion_text}};
            if (with_logprobs) out["token_logprobs"] = logprobs;
            else out["token_logprobs"] = nullptr;
            res.set_content(out.dump(), "application/json");
        });
        srv_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            if (fail(res)) return;
            const auto body = nlohmann::json::parse(req.body);
            const auto n = ++embed_calls_;
            std::vector<std::vector<double>> rows;
            std::size_t d = 3;
            if (mode == Mode::dim_change && n > 1) d = 4;
            for (const auto& t : body.at("input")) {
                const auto s = t.get<std::string>();
                std::vector<double> v(d, 0.0);
                if (mode != Mode::zero_vector) {
                    v[0] = 1.0 + static_cast<double>(s.size());
                    v[1] = s.empty() ? 0.5 : static_cast<double>(static_cast<unsigned char>(s[0]));
                }
                rows.push_back(v);
            }
            {
                std::lock_guard lock(mu_);
                batch_sizes_.push_back(rows.size());
                last_embedding_ = body;
            }
            res.set_content(nlohmann::json({{"embeddings", rows}, {"dimension", d}, {"model", "stub"}}).dump(),
                            "application/json");
        });
        port_ = srv_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { srv_.listen_after_bind(); });
        srv_.wait_until_ready();
    }

    ~Server() {
        srv_.stop();
        if (thread_.joinable()) thread_.join();
    }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::size_t hits() const { return hits_.load(); }
    std::vector<std::size_t> batch_sizes() const {
        std::lock_guard lock(mu_);
        return batch_sizes_;
    }
    nlohmann::json last_completion() const {
        std::lock_guard lock(mu_);
        return last_completion_;
    }
    nlohmann::json last_embedding() const {
        std::lock_guard lock(mu_);
        return last_embedding_;
    }
    std::string last_auth() const {
        std::lock_guard lock(mu_);
        return last_auth_;
    }

    std::atomic<Mode> mode{Mode::ok};
    std::atomic<int> flaky_failures{2};  // 503s before success in flaky mode
    std::string completion_text = "hello";
    bool with_logprobs = false;
    std::vector<double> logprobs;

private:
    bool fail(httplib::Response& res) {
        const auto n = ++hits_;
        switch (mode.load()) {
            case Mode::unavailable:
                res.status = 503;
                return true;
            case Mode::flaky:
                if (static_cast<int>(n) <= flaky_failures.load()) {
                    res.status = 503;
                    return true;
                }
                return false;
            case Mode::slow:
                std::this_thread::sleep_for(std::chrono::milliseconds(400));
                res.set_content("{}", "application/json");
                return true;
            case Mode::malformed:
                res.set_content("{\"text\": \"unterminated", "application/json");
                return true;
            case Mode::not_found:
                res.status = 404;
                return true;
            default:
                return false;
        }
    }

    httplib::Server srv_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> embed_calls_{0};
    mutable std::mutex mu_;
    std::vector<std::size_t> batch_sizes_;
    nlohmann::json last_completion_;
    nlohmann::json last_embedding_;
    std::string last_auth_;
};

}  // namespace stub
