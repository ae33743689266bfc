#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "secda_dse/explorer.hpp"

namespace httplib {
class Server;
}

namespace secda_dse {

struct ApiResponse {
    int status = 200;
    Json body;
};

ApiResponse api_error(int status, const std::string& code, const std::string& message);

// Maps a domain error onto the HTTP status it is reported with.
int status_for(const Error& error);

/// HTTP/JSON front end over one workspace. Holds the workspace lock for its
/// lifetime so only one server can write the database.
class Service {
public:
    explicit Service(std::filesystem::path workspace);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Transport-independent dispatch; every HTTP request goes through here.
    ApiResponse handle(const std::string& method, const std::string& path,
                       const std::map<std::string, std::string>& query, const std::string& body);

    // Binds the listening socket; port 0 picks a free port. Throws PortInUse.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void stop();

    // Used by tests to run explorations against a stub provider.
    void set_provider_factory(std::function<std::shared_ptr<ChatProvider>()> factory);

private:
    ApiResponse list_runs() const;
    ApiResponse get_run(const std::string& run_id) const;
    ApiResponse get_run_source(const std::string& run_id) const;
    ApiResponse list_datapoints(const std::map<std::string, std::string>& query) const;
    ApiResponse post_verdict(const std::string& point_id, const std::string& body);
    ApiResponse create_exploration(const std::string& body);
    ApiResponse step_exploration(const std::string& id);
    ApiResponse get_exploration(const std::string& id) const;
    ApiResponse search(const std::map<std::string, std::string>& query) const;

    std::filesystem::path run_folder(const std::string& run_id) const;

    std::filesystem::path workspace_;
    int lock_fd_ = -1;
    std::unique_ptr<CostDb> db_;
    std::optional<RetrievalIndex> index_;
    mutable std::mutex mutex_;
    std::map<std::string, std::unique_ptr<Explorer>> explorations_;
    std::function<std::shared_ptr<ChatProvider>()> provider_factory_;
    std::unique_ptr<httplib::Server> server_;
};

void serve(const std::filesystem::path& workspace, int port);

}  // namespace secda_dse
