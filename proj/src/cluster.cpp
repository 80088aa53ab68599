#include "gradcode/cluster.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

#include "gradcode/decoding.hpp"
#include "gradcode/tomlite.hpp"
#include "gradcode/util.hpp"

namespace gradcode {

using nlohmann::json;

Graph graph_from_scheme(const AssignmentScheme& scheme) {
    if (scheme.kind != "graph")
        throw std::runtime_error("graph_from_scheme: scheme kind is not 'graph'");
    Graph g;
    g.n = scheme.n_blocks;
    g.vertex_transitive = scheme.vertex_transitive;
    for (const auto& col : scheme.columns) {
        if (col.size() != 2 || col[0].second != 1.0 || col[1].second != 1.0)
            throw std::runtime_error("graph_from_scheme: malformed graph column");
        g.edges.emplace_back(col[0].first, col[1].first);
    }
    g.degree.assign(g.n, 0);
    for (auto [u, v] : g.edges) {
        g.degree[u]++;
        g.degree[v]++;
    }
    return g;
}

ClusterConfig cluster_config_from_toml(const json& toml) {
    ClusterConfig c;
    auto get = [&](const char* key) -> const json& {
        if (!toml.contains(key))
            throw std::runtime_error(std::string("cluster config: missing key '") + key + "'");
        return toml.at(key);
    };
    c.host = toml.value("host", "127.0.0.1");
    c.port = toml.value("port", 0);
    c.m = get("m").get<int>();
    c.scheme_file = get("scheme_file").get<std::string>();
    c.N = get("N").get<long long>();
    c.k = get("k").get<int>();
    c.noise_sigma = toml.value("noise_sigma", 0.0);
    c.problem_seed = get("problem_seed").get<std::uint64_t>();
    c.n_blocks = get("n_blocks").get<int>();
    c.p = toml.value("p", 0.0);
    if (!(c.p >= 0.0 && c.p < 1.0))
        throw std::runtime_error("cluster config: p must be in [0, 1)");
    c.decoder = toml.value("decoder", "optimal");
    c.iterations = get("iterations").get<int>();
    c.gamma = get("gamma").get<double>();
    c.seed = toml.value("seed", 0);
    c.handshake_timeout_ms = toml.value("handshake_timeout_ms", 10000);
    c.iteration_deadline_ms = toml.value("iteration_deadline_ms", 60000);
    if (toml.contains("delay")) {
        const json& d = toml.at("delay");
        std::string kind = d.value("model", "none");
        if (kind == "none") {
            c.delay.kind = DelayModel::Kind::None;
        } else if (kind == "fixed") {
            c.delay.kind = DelayModel::Kind::Fixed;
            c.delay.ms = d.at("ms").get<double>();
        } else if (kind == "lognormal") {
            c.delay.kind = DelayModel::Kind::Lognormal;
            c.delay.log_mu = d.at("mu").get<double>();
            c.delay.log_sigma = d.at("sigma").get<double>();
        } else if (kind == "pin") {
            c.delay.kind = DelayModel::Kind::Pin;
            c.delay.ms = d.at("ms").get<double>();
            for (const auto& w : d.at("workers")) c.delay.pinned.push_back(w.get<int>());
        } else {
            throw std::runtime_error("cluster config: unknown delay model '" + kind + "'");
        }
    }
    return c;
}

ClusterConfig load_cluster_config(const std::string& path) {
    return cluster_config_from_toml(parse_toml_file(path));
}

namespace {

struct Socket {
    int fd = -1;
    Socket() = default;
    explicit Socket(int f) : fd(f) {}
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    Socket(Socket&& other) noexcept : fd(other.fd) { other.fd = -1; }
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd = other.fd;
            other.fd = -1;
        }
        return *this;
    }
    ~Socket() { close_fd(); }
    void close_fd() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

void send_line(int fd, const std::string& line) {
    std::string msg = line;
    msg.push_back('\n');
    std::size_t sent = 0;
    while (sent < msg.size()) {
        ssize_t n = ::send(fd, msg.data() + sent, msg.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) throw std::runtime_error("send failed: connection lost");
        sent += static_cast<std::size_t>(n);
    }
}

struct LineReader {
    int fd = -1;
    std::string buffer;

    // Returns false on timeout; throws on disconnect.
    bool read_line(std::string& out, int timeout_ms) {
        auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(timeout_ms);
        for (;;) {
            auto nl = buffer.find('\n');
            if (nl != std::string::npos) {
                out = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                return true;
            }
            auto now = std::chrono::steady_clock::now();
            if (now >= deadline) return false;
            int remain = static_cast<int>(
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
            struct pollfd pfd{fd, POLLIN, 0};
            int pr = ::poll(&pfd, 1, remain > 0 ? remain : 1);
            if (pr == 0) return false;
            if (pr < 0) throw std::runtime_error("poll failed");
            char chunk[4096];
            ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
            if (n <= 0) throw std::runtime_error("connection closed by peer");
            buffer.append(chunk, static_cast<std::size_t>(n));
        }
    }
};

std::vector<double> eigen_to_vec(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_to_eigen(const std::vector<double>& v) {
    Eigen::VectorXd out(v.size());
    std::memcpy(out.data(), v.data(), v.size() * sizeof(double));
    return out;
}

}  // namespace

PsResult serve_ps(const ClusterConfig& config, const std::function<void(int)>& on_listening) {
    AssignmentScheme scheme = load_scheme(config.scheme_file);
    if (scheme.m != config.m)
        throw std::runtime_error("serve_ps: worker count does not match scheme columns");
    std::optional<Graph> graph;
    if (config.decoder == "optimal") graph = graph_from_scheme(scheme);
    Problem problem = gen_least_squares(config.N, config.k, config.noise_sigma,
                                        config.problem_seed, config.n_blocks);
    const std::uint64_t expect_hash = scheme_hash(scheme);

    Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
    if (listener.fd < 0) throw std::runtime_error("serve_ps: socket() failed");
    int one = 1;
    ::setsockopt(listener.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(config.port));
    if (::inet_pton(AF_INET, config.host.c_str(), &addr.sin_addr) != 1)
        throw std::runtime_error("serve_ps: bad host " + config.host);
    if (::bind(listener.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw std::runtime_error("serve_ps: bind failed");
    if (::listen(listener.fd, config.m) != 0)
        throw std::runtime_error("serve_ps: listen failed");
    socklen_t alen = sizeof(addr);
    ::getsockname(listener.fd, reinterpret_cast<sockaddr*>(&addr), &alen);
    PsResult result;
    result.actual_port = ntohs(addr.sin_port);
    if (on_listening) on_listening(result.actual_port);

    // Handshake: all m workers must say hello within the timeout.
    std::vector<Socket> conns(config.m);
    std::vector<LineReader> readers(config.m);
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(config.handshake_timeout_ms);
    int registered = 0;
    while (registered < config.m) {
        auto now = std::chrono::steady_clock::now();
        if (now >= deadline)
            throw std::runtime_error("serve_ps: handshake timeout, " +
                                     std::to_string(registered) + "/" +
                                     std::to_string(config.m) + " workers registered");
        int remain = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
        struct pollfd pfd{listener.fd, POLLIN, 0};
        if (::poll(&pfd, 1, remain) <= 0) continue;
        Socket conn(::accept(listener.fd, nullptr, nullptr));
        if (conn.fd < 0) continue;
        int nd = 1;
        ::setsockopt(conn.fd, IPPROTO_TCP, TCP_NODELAY, &nd, sizeof(nd));
        LineReader reader{conn.fd};
        std::string line;
        if (!reader.read_line(line, 2000)) continue;
        json hello = json::parse(line);
        if (hello.value("type", "") != "hello")
            throw std::runtime_error("serve_ps: expected hello, got " + line);
        int id = hello.at("worker_id").get<int>();
        if (id < 0 || id >= config.m || conns[id].fd >= 0)
            throw std::runtime_error("serve_ps: bad or duplicate worker id " + std::to_string(id));
        if (hello.at("scheme_hash").get<std::string>() != std::to_string(expect_hash))
            throw std::runtime_error("serve_ps: scheme hash mismatch from worker " +
                                     std::to_string(id));
        conns[id] = std::move(conn);
        readers[id] = LineReader{conns[id].fd};
        ++registered;
    }

    // Shared permutation rho: identical to what the simulation draws for this
    // seed, so cluster runs replay bit-for-bit against gcod_run.
    std::vector<int> rho =
        gcod_run_with_sampler(problem, scheme,
                              config.decoder == "optimal" ? DecoderKind::OptimalGraph
                                                          : DecoderKind::Fixed,
                              config.p, constant_step(0.0), 0, config.seed,
                              [&](int) { return StragglerSet{config.m, {}, "none"}; })
            .permutation;

    json ack{{"type", "hello_ack"},
             {"rho", rho},
             {"iterations", config.iterations},
             {"gamma", config.gamma}};
    for (int j = 0; j < config.m; ++j) send_line(conns[j].fd, ack.dump());

    const int collect = static_cast<int>(
        std::ceil(static_cast<double>(config.m) * (1.0 - config.p)));
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(config.k);
    result.trace.permutation = rho;
    result.trace.iters.push_back(
        {(theta - problem.theta_star).squaredNorm(), 0.0, 0, 0.0});

    for (int t = 1; t <= config.iterations; ++t) {
        json params{{"type", "params"},
                    {"iter", t},
                    {"theta_b64", doubles_to_b64(eigen_to_vec(theta))}};
        std::string msg = params.dump();
        for (int j = 0; j < config.m; ++j) send_line(conns[j].fd, msg);

        std::vector<std::optional<Eigen::VectorXd>> grads(config.m);
        int received = 0;
        auto iter_deadline = std::chrono::steady_clock::now() +
                             std::chrono::milliseconds(config.iteration_deadline_ms);
        while (received < collect) {
            auto now = std::chrono::steady_clock::now();
            if (now >= iter_deadline)
                throw std::runtime_error("serve_ps: iteration " + std::to_string(t) +
                                         " deadline with only " + std::to_string(received) +
                                         "/" + std::to_string(collect) + " gradients");
            std::vector<struct pollfd> pfds;
            std::vector<int> owners;
            for (int j = 0; j < config.m; ++j) {
                if (grads[j]) continue;
                // buffered lines are consumed first
                std::string line;
                while (!readers[j].buffer.empty() && readers[j].read_line(line, 0)) {
                    json grad = json::parse(line);
                    if (grad.value("type", "") != "grad") continue;
                    if (grad.at("iter").get<int>() != t) continue;  // stale, discard
                    grads[j] = vec_to_eigen(b64_to_doubles(grad.at("g_b64").get<std::string>()));
                    ++received;
                    break;
                }
                if (grads[j]) continue;
                pfds.push_back({conns[j].fd, POLLIN, 0});
                owners.push_back(j);
            }
            if (received >= collect) break;
            int remain = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                              iter_deadline - now)
                                              .count());
            int pr = ::poll(pfds.data(), pfds.size(), remain > 0 ? remain : 1);
            if (pr < 0) throw std::runtime_error("serve_ps: poll failed");
            for (std::size_t i = 0; i < pfds.size() && received < collect; ++i) {
                if (!(pfds[i].revents & (POLLIN | POLLHUP))) continue;
                int j = owners[i];
                char chunk[65536];
                ssize_t nrecv = ::recv(conns[j].fd, chunk, sizeof(chunk), 0);
                if (nrecv <= 0)
                    throw std::runtime_error("serve_ps: worker " + std::to_string(j) +
                                             " disconnected at iteration " + std::to_string(t));
                readers[j].buffer.append(chunk, static_cast<std::size_t>(nrecv));
                std::string line;
                while (received < collect && readers[j].read_line(line, 0)) {
                    json grad = json::parse(line);
                    if (grad.value("type", "") != "grad") continue;
                    if (grad.at("iter").get<int>() != t) continue;
                    if (!grads[j]) {
                        grads[j] = vec_to_eigen(
                            b64_to_doubles(grad.at("g_b64").get<std::string>()));
                        ++received;
                    }
                }
            }
        }

        std::vector<int> straggler_ids;
        for (int j = 0; j < config.m; ++j)
            if (!grads[j]) straggler_ids.push_back(j);
        StragglerSet stragglers{config.m, straggler_ids, "emergent"};

        std::vector<double> w;
        std::vector<double> alpha;
        if (config.decoder == "optimal") {
            auto dec = decode_optimal_graph(*graph, stragglers);
            w = std::move(dec.w);
            alpha = std::move(dec.alpha);
        } else {
            auto dec = decode_fixed(scheme, stragglers, config.p);
            w = std::move(dec.w);
            alpha = std::move(dec.alpha);
        }

        // Same reduction order as simulation: ascending worker id.
        Eigen::VectorXd update = Eigen::VectorXd::Zero(config.k);
        for (int j = 0; j < config.m; ++j) {
            if (!grads[j] || w[j] == 0.0) continue;
            update += w[j] * *grads[j];
        }
        theta -= config.gamma * update;
        result.trace.iters.push_back({(theta - problem.theta_star).squaredNorm(), config.gamma,
                                      static_cast<int>(straggler_ids.size()),
                                      decoding_error_sq(alpha)});
    }

    json done{{"type", "done"}};
    for (int j = 0; j < config.m; ++j) send_line(conns[j].fd, done.dump());
    // Linger until every worker closes its end, so a straggler can still flush
    // its final gradient and read "done" instead of hitting a reset socket.
    auto drain_deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    for (int j = 0; j < config.m; ++j) {
        while (std::chrono::steady_clock::now() < drain_deadline) {
            struct pollfd pfd{conns[j].fd, POLLIN, 0};
            if (::poll(&pfd, 1, 100) <= 0) continue;
            char sink[4096];
            if (::recv(conns[j].fd, sink, sizeof(sink), 0) <= 0) break;
        }
    }
    result.theta = theta;
    result.trace.theta_final = theta;
    return result;
}

int run_worker(const ClusterConfig& config, int worker_id, int port_override) {
    if (worker_id < 0 || worker_id >= config.m)
        throw std::runtime_error("run_worker: worker id out of range");
    AssignmentScheme scheme = load_scheme(config.scheme_file);
    if (scheme.columns[worker_id].empty())
        throw std::runtime_error("run_worker: scheme column " + std::to_string(worker_id) +
                                 " is empty");
    Problem problem = gen_least_squares(config.N, config.k, config.noise_sigma,
                                        config.problem_seed, config.n_blocks);

    int port = port_override > 0 ? port_override : config.port;
    Socket sock;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(config.handshake_timeout_ms);
    for (;;) {
        sock = Socket(::socket(AF_INET, SOCK_STREAM, 0));
        if (sock.fd < 0) throw std::runtime_error("run_worker: socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        if (::inet_pton(AF_INET, config.host.c_str(), &addr.sin_addr) != 1)
            throw std::runtime_error("run_worker: bad host");
        if (::connect(sock.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) break;
        sock.close_fd();
        if (std::chrono::steady_clock::now() >= deadline)
            throw std::runtime_error("run_worker: cannot connect to parameter server");
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    int nd = 1;
    ::setsockopt(sock.fd, IPPROTO_TCP, TCP_NODELAY, &nd, sizeof(nd));

    json hello{{"type", "hello"},
               {"worker_id", worker_id},
               {"scheme_hash", std::to_string(scheme_hash(scheme))}};
    send_line(sock.fd, hello.dump());

    LineReader reader{sock.fd};
    std::string line;
    if (!reader.read_line(line, config.handshake_timeout_ms))
        throw std::runtime_error("run_worker: handshake ack timeout");
    json ack = json::parse(line);
    if (ack.value("type", "") != "hello_ack")
        throw std::runtime_error("run_worker: expected hello_ack");
    std::vector<int> rho = ack.at("rho").get<std::vector<int>>();

    auto delay_rng = make_rng(config.problem_seed, 0xDE1A, worker_id);
    auto apply_delay = [&]() {
        double ms = 0.0;
        switch (config.delay.kind) {
            case DelayModel::Kind::None:
                return;
            case DelayModel::Kind::Fixed:
                ms = config.delay.ms;
                break;
            case DelayModel::Kind::Lognormal: {
                std::lognormal_distribution<double> dist(config.delay.log_mu,
                                                         config.delay.log_sigma);
                ms = dist(delay_rng);
                break;
            }
            case DelayModel::Kind::Pin: {
                bool pinned = false;
                for (int w : config.delay.pinned)
                    if (w == worker_id) pinned = true;
                if (!pinned) return;
                ms = config.delay.ms;
                break;
            }
        }
        if (ms > 0.0)
            std::this_thread::sleep_for(
                std::chrono::microseconds(static_cast<long long>(ms * 1000.0)));
    };

    for (;;) {
        if (!reader.read_line(line, config.iteration_deadline_ms))
            throw std::runtime_error("run_worker: timed out waiting for parameters");
        json msg = json::parse(line);
        std::string type = msg.value("type", "");
        if (type == "done") return 0;
        if (type != "params")
            throw std::runtime_error("run_worker: malformed message: " + line);
        int iter = msg.at("iter").get<int>();
        Eigen::VectorXd theta =
            vec_to_eigen(b64_to_doubles(msg.at("theta_b64").get<std::string>()));
        apply_delay();
        Eigen::VectorXd g = Eigen::VectorXd::Zero(config.k);
        for (auto [i, val] : scheme.columns[worker_id])
            g += val * problem.block_gradient(rho[i], theta);
        json grad{{"type", "grad"},
                  {"iter", iter},
                  {"worker_id", worker_id},
                  {"g_b64", doubles_to_b64(eigen_to_vec(g))}};
        send_line(sock.fd, grad.dump());
    }
}

}  // namespace gradcode
