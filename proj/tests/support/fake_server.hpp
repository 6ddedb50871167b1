#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "mraglab/backends.hpp"

namespace mraglab::testing {

/// In-process HTTP server on a loopback port, for exercising the wire
/// adapters. Handlers see the parsed JSON body.
class FakeServer {
public:
    struct Request {
        std::string path;
        std::string authorization;
        nlohmann::json body;
    };
    using Handler = std::function<void(const Request&, httplib::Response&)>;

    FakeServer() { port_ = server_.bind_to_any_port("127.0.0.1"); }
    ~FakeServer() { stop(); }

    void on(const std::string& path, Handler h) {
        server_.Post(path, [this, h](const httplib::Request& req, httplib::Response& res) {
            Request r{req.path, req.get_header_value("Authorization"), nlohmann::json::parse(req.body, nullptr, false)};
            {
                std::lock_guard lock(mu_);
                seen_.push_back(r);
            }
            h(r, res);
        });
    }

    void start() {
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::vector<Request> requests() const {
        std::lock_guard lock(mu_);
        return seen_;
    }

    backends::BackendProfile profile(const std::string& name, backends::BackendKind kind) const {
        backends::BackendProfile p;
        p.name = name;
        p.kind = kind;
        p.backend = "http";
        p.endpoint = endpoint();
        p.model_name = "fake";
        p.timeout_s = 5.0;
        p.max_retries = 3;
        p.backoff_base_s = 0.001;
        p.backoff_max_s = 0.002;
        return p;
    }

    static void reply(httplib::Response& res, const nlohmann::json& j) {
        res.set_content(j.dump(), "application/json");
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    mutable std::mutex mu_;
    std::vector<Request> seen_;
};

}  // namespace mraglab::testing
