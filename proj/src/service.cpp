#include "secda_dse/service.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "httplib.h"

namespace secda_dse {

namespace {

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream in(path);
    std::string part;
    while (std::getline(in, part, '/')) {
        if (!part.empty()) parts.push_back(part);
    }
    return parts;
}

bool safe_segment(const std::string& segment) {
    return !segment.empty() && segment != "." && segment != ".." && segment.find('/') == std::string::npos &&
           segment.find('\\') == std::string::npos;
}

std::optional<std::string> param(const std::map<std::string, std::string>& query, const std::string& key) {
    auto it = query.find(key);
    if (it == query.end() || it->second.empty()) return std::nullopt;
    return it->second;
}

std::size_t parse_count(const std::string& text, const std::string& field) {
    try {
        std::size_t used = 0;
        const long long value = std::stoll(text, &used);
        if (used != text.size() || value < 0) throw std::invalid_argument(field);
        return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
        throw ValidationError(field, field + " must be a non-negative integer");
    }
}

bool parse_bool(const std::string& text, const std::string& field) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ValidationError(field, field + " must be true or false");
}

Json exploration_summary(const std::string& id, const Explorer& explorer) {
    Json out = to_json(explorer.state());
    out["exploration_id"] = id;
    out["strategy"] = to_string(explorer.config().strategy);
    out["stop_reason"] = explorer.stop_reason();
    return out;
}

}  // namespace

ApiResponse api_error(int status, const std::string& code, const std::string& message) {
    return {status, Json{{"status", status}, {"code", code}, {"message", message}}};
}

int status_for(const Error& error) {
    const auto& code = error.code();
    if (code == "unknown_point" || code == "unknown_run" || code == "missing_artifact") return 404;
    if (code == "validation_error" || code == "parse_error" || code == "unknown_metric" ||
        code == "unsupported_template" || code == "profile_missing_module") {
        return 400;
    }
    if (code == "verdict_conflict" || code == "space_exhausted" || code == "duplicate_point") return 409;
    if (code == "provider_unreachable") return 502;
    return 500;
}

Service::Service(std::filesystem::path workspace) : workspace_(std::move(workspace)) {
    init_workspace(workspace_);
    const auto lock_path = workspace_ / "service.lock";
    lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (lock_fd_ < 0) throw StorageError("cannot open lock file " + lock_path.string());
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(lock_fd_);
        lock_fd_ = -1;
        throw WorkspaceLocked("workspace " + workspace_.string() + " is already served by another process");
    }
    db_ = std::make_unique<CostDb>(workspace_ / "db" / "datapoints.ndjson");
    if (std::filesystem::exists(workspace_ / "index.json")) index_ = load_index_cache(workspace_ / "index.json");
    provider_factory_ = [] { return std::make_shared<HttpChatProvider>(); };
}

Service::~Service() {
    stop();
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
    }
}

void Service::set_provider_factory(std::function<std::shared_ptr<ChatProvider>()> factory) {
    std::lock_guard lock(mutex_);
    provider_factory_ = std::move(factory);
}

std::filesystem::path Service::run_folder(const std::string& run_id) const {
    if (!safe_segment(run_id)) throw Error("unknown_run", "unknown run " + run_id);
    auto folder = workspace_ / "runs" / run_id;
    if (!std::filesystem::is_directory(folder)) throw Error("unknown_run", "unknown run " + run_id);
    return folder;
}

ApiResponse Service::handle(const std::string& method, const std::string& path,
                            const std::map<std::string, std::string>& query, const std::string& body) {
    const auto parts = split_path(path);
    try {
        if (parts.empty() || parts[0] != "api") return api_error(404, "not_found", "no route for " + path);
        const auto n = parts.size();

        if (n == 2 && parts[1] == "runs" && method == "GET") return list_runs();
        if (n == 3 && parts[1] == "runs" && method == "GET") return get_run(parts[2]);
        if (n == 4 && parts[1] == "runs" && parts[3] == "source" && method == "GET") return get_run_source(parts[2]);
        if (n == 2 && parts[1] == "datapoints" && method == "GET") return list_datapoints(query);
        if (n == 4 && parts[1] == "datapoints" && parts[3] == "verdict" && method == "POST") {
            return post_verdict(parts[2], body);
        }
        if (n == 2 && parts[1] == "explorations" && method == "POST") return create_exploration(body);
        if (n == 3 && parts[1] == "explorations" && method == "GET") return get_exploration(parts[2]);
        if (n == 4 && parts[1] == "explorations" && parts[3] == "step" && method == "POST") {
            return step_exploration(parts[2]);
        }
        if (n == 2 && parts[1] == "search" && method == "GET") return search(query);
        return api_error(404, "not_found", "no route for " + method + " " + path);
    } catch (const ValidationError& e) {
        return api_error(400, e.code(), e.what());
    } catch (const Error& e) {
        return api_error(status_for(e), e.code(), e.what());
    } catch (const std::exception& e) {
        return api_error(500, "internal_error", e.what());
    }
}

ApiResponse Service::list_runs() const {
    Json runs = Json::array();
    const auto root = workspace_ / "runs";
    std::vector<std::filesystem::path> folders;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory()) folders.push_back(entry.path());
    }
    std::sort(folders.begin(), folders.end());
    for (const auto& folder : folders) {
        try {
            if (std::filesystem::exists(folder / "summary.json")) {
                runs.push_back(to_json(load_run_summary(read_json_file(folder / "summary.json"))));
            } else {
                runs.push_back(to_json(summarize_run(folder)));
            }
        } catch (const Error&) {
            // incomplete run folder (failed candidate); not listed
        }
    }
    return {200, runs};
}

ApiResponse Service::get_run(const std::string& run_id) const {
    const auto folder = run_folder(run_id);
    Json out{{"summary", to_json(summarize_run(folder))},
             {"design", read_json_file(folder / "design.json")},
             {"report", read_json_file(folder / "report.json")}};
    Json transcript = nullptr;
    if (std::filesystem::exists(folder / "prompt.txt")) {
        transcript = Json{{"prompt", read_text_file(folder / "prompt.txt")},
                          {"reply", std::filesystem::exists(folder / "reply.txt") ? read_text_file(folder / "reply.txt")
                                                                                  : std::string()}};
    }
    out["transcript"] = transcript;
    return {200, out};
}

ApiResponse Service::get_run_source(const std::string& run_id) const {
    const auto src = run_folder(run_id) / "src";
    Json files = Json::array();
    if (std::filesystem::is_directory(src)) {
        std::vector<std::filesystem::path> paths;
        for (const auto& entry : std::filesystem::recursive_directory_iterator(src)) {
            if (entry.is_regular_file()) paths.push_back(entry.path());
        }
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) {
            files.push_back(Json{{"path", p.lexically_relative(src).generic_string()}, {"content", read_text_file(p)}});
        }
    }
    return {200, Json{{"run_id", run_id}, {"files", files}}};
}

ApiResponse Service::list_datapoints(const std::map<std::string, std::string>& query) const {
    PointFilter filter;
    if (auto v = param(query, "verdict")) filter.verdict = verdict_from_string(*v);
    if (auto v = param(query, "feasible")) filter.feasible = parse_bool(*v, "feasible");
    if (auto v = param(query, "device")) filter.device = *v;
    if (auto v = param(query, "source")) filter.source = source_from_string(*v);
    if (auto v = param(query, "design_id")) filter.design_id = *v;
    const auto order = param(query, "order").value_or("sequence");
    std::optional<std::size_t> limit;
    if (auto v = param(query, "limit")) limit = parse_count(*v, "limit");

    Json out = Json::array();
    for (const auto& p : db_->query(filter, order, limit)) out.push_back(to_json(p));
    return {200, out};
}

ApiResponse Service::post_verdict(const std::string& point_id, const std::string& body) {
    const Json request = parse_json_text(body, "verdict request");
    FieldReader reader(request, "verdict request");
    const auto verdict = verdict_from_string(reader.required<std::string>("verdict"));
    const auto notes = reader.optional_or<std::string>("notes", "");
    reader.finish();
    if (verdict != Verdict::accepted && verdict != Verdict::rejected) {
        throw ValidationError("verdict", "verdict must be accepted or rejected");
    }

    std::lock_guard lock(mutex_);
    for (auto& [id, explorer] : explorations_) {
        if (!explorer->has_point(point_id)) continue;
        const auto& state = explorer->apply_verdict(point_id, verdict, notes);
        return {200, Json{{"point_id", point_id},
                          {"verdict", to_string(verdict)},
                          {"exploration_id", id},
                          {"pending_verdicts", state.pending_verdicts.size()},
                          {"best", to_json(state)["best"]}}};
    }

    // Points from earlier sessions: verdicts go straight to the database.
    const auto original = db_->find(point_id);
    if (!original || original->source == DataSource::human || original->verdict != Verdict::pending) {
        throw UnknownPoint("no pending point " + point_id);
    }
    PointFilter prior;
    prior.design_id = original->design_id;
    prior.source = DataSource::human;
    for (const auto& existing : db_->query(prior)) {
        if (existing.configuration == original->configuration && existing.workload == original->workload &&
            existing.device == original->device) {
            if (existing.verdict == verdict && existing.rationale.value_or("") == notes) {
                return {200, Json{{"point_id", point_id}, {"verdict", to_string(verdict)}, {"record", existing.point_id}}};
            }
            throw VerdictConflict("point " + point_id + " already has a different verdict");
        }
    }
    const auto record = record_human_verdict(*db_, *original, verdict, notes, wall_timestamp());
    return {200, Json{{"point_id", point_id}, {"verdict", to_string(verdict)}, {"record", record}}};
}

ApiResponse Service::create_exploration(const std::string& body) {
    auto config = load_exploration_config(parse_json_text(body, "exploration config"));
    config.workspace = workspace_;

    std::lock_guard lock(mutex_);
    char id[32];
    std::snprintf(id, sizeof(id), "exp-%04zu", explorations_.size() + 1);
    auto provider = config.strategy == Strategy::llm ? provider_factory_() : nullptr;
    explorations_[id] = std::make_unique<Explorer>(std::move(config), *db_, std::move(provider));
    return {201, Json{{"exploration_id", id}}};
}

ApiResponse Service::step_exploration(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = explorations_.find(id);
    if (it == explorations_.end()) return api_error(404, "unknown_exploration", "unknown exploration " + id);
    const auto outcome = it->second->step();
    Json best = nullptr;
    if (outcome.best) {
        best = Json{{"point", to_json(outcome.best->point)},
                    {"objective", number_or_null(outcome.best->objective)},
                    {"run_id", outcome.best->run_id},
                    {"point_id", outcome.best->point_id}};
    }
    return {200, Json{{"iteration", outcome.iteration}, {"best", best}, {"evaluated", outcome.evaluated_run_ids}}};
}

ApiResponse Service::get_exploration(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = explorations_.find(id);
    if (it == explorations_.end()) return api_error(404, "unknown_exploration", "unknown exploration " + id);
    return {200, exploration_summary(id, *it->second)};
}

ApiResponse Service::search(const std::map<std::string, std::string>& query) const {
    const auto q = param(query, "q").value_or("");
    const auto k = param(query, "k") ? parse_count(*param(query, "k"), "k") : std::size_t{5};
    Json out = Json::array();
    if (index_) {
        for (const auto& hit : index_->retrieve(q, k)) out.push_back(Json{{"doc_id", hit.doc_id}, {"score", hit.score}});
    }
    return {200, out};
}

int Service::bind(const std::string& host, int port) {
    server_ = std::make_unique<httplib::Server>();
    // httplib's defaults include SO_REUSEPORT, which would let a second server share a busy port.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [key, value] : req.params) query[key] = value;
        const auto response = handle(req.method, req.path, query, req.body);
        res.status = response.status;
        res.set_content(response.body.dump(), "application/json");
    };
    server_->Get(R"(/api/.*)", route);
    server_->Post(R"(/api/.*)", route);

    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) throw PortInUse("cannot bind any port on " + host);
        return bound;
    }
    if (!server_->bind_to_port(host, port)) throw PortInUse("port " + std::to_string(port) + " is in use");
    return port;
}

void Service::listen() {
    if (!server_) throw StorageError("service is not bound");
    server_->listen_after_bind();
}

void Service::stop() {
    if (server_) server_->stop();
}

void serve(const std::filesystem::path& workspace, int port) {
    Service service(workspace);
    service.bind("127.0.0.1", port);
    service.listen();
}

}  // namespace secda_dse
