#pragma once

// Deterministic discrete-event simulator contrasting two architectures for
// the same client workload:
//
//   legacy:   every data query is an on-chain transaction; executing it needs
//             the resource server, so the RS is hit once when the miner
//             executes the block and once more per full node when the block
//             is validated -> N+1 RS requests per query.
//   proposed: a data query is one RS call; the chain only carries the token
//             validation, which touches no external service.
//
// The simulator keeps a reduced block model (hash-chained ids, longest-chain
// adoption, first-seen tie-break) rather than full signed transactions: the
// quantities of interest here are request load, propagation and convergence,
// and the full transaction semantics are exercised by the chain itself.
//
// Determinism: one event loop, events ordered by (time, kind, insertion
// sequence); every stochastic stream (client arrivals, gossip delays, mining
// races) has its own generator derived from the master seed, so a report is
// byte-identical across runs of the same build. Client arrival streams do not
// depend on n_nodes, so proposed-mode RS load is exactly invariant under node
// sweeps at a fixed seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <random>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "permchain/common.hpp"

#include <json.hpp>

namespace permchain::sim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed + 0x9E3779B97F4A7C15ull * (index + 1));
}

// Hand-rolled distributions: the standard library leaves distribution
// algorithms implementation-defined, and reports must not change when the
// standard library does.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() { return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0); }

    double exponential(double mean) { return -mean * std::log(1.0 - uniform01()); }

    // uniform in (0, hi]
    double delay(double hi) { return hi * (1.0 - uniform01()); }

    std::uint64_t next() { return eng_(); }

  private:
    std::mt19937_64 eng_;
};

enum class Mode { Legacy, Proposed };

inline const char* mode_name(Mode m) { return m == Mode::Legacy ? "legacy" : "proposed"; }

inline Mode mode_from_string(const std::string& s) {
    if (s == "legacy") return Mode::Legacy;
    if (s == "proposed") return Mode::Proposed;
    throw Error(Errc::ConfigInvalid, "mode must be \"legacy\" or \"proposed\", got \"" + s + "\"");
}

struct SimConfig {
    Mode mode = Mode::Legacy;
    int n_nodes = 8;
    double delta_seconds = 2.0;   // gossip delay bound; per-link delays ~ U(0, delta]
    double client_rate = 10.0;    // aggregate data-query rate, requests/second
    int n_clients = 8;
    double duration_seconds = 600.0;
    int rs_buffer = 4096;         // RS waiting room, excluding the request in service
    double rs_service_rate = 1e6; // deterministic service, 1/rate seconds per request
    double rs_timeout_seconds = 0.0;  // 0 disables; queued longer than this counts as a drop
    double block_interval_seconds = 15.0;  // network-wide mean time between blocks
    int max_txs_per_block = 512;
    std::uint64_t seed = 42;
    double warmup_fraction = 0.1;  // excluded from rate measurements
    bool mine_empty_blocks = true;
    double drain_factor = 3.0;  // post-duration settling window, in units of (delta + interval)

    void validate() const {
        if (n_nodes < 1) throw Error(Errc::ConfigInvalid, "n_nodes must be >= 1");
        if (!(delta_seconds > 0)) throw Error(Errc::ConfigInvalid, "delta_seconds must be > 0");
        if (!(client_rate > 0)) throw Error(Errc::ConfigInvalid, "client_rate must be > 0");
        if (n_clients < 1) throw Error(Errc::ConfigInvalid, "n_clients must be >= 1");
        if (!(duration_seconds > 0)) throw Error(Errc::ConfigInvalid, "duration_seconds must be > 0");
        if (rs_buffer < 0) throw Error(Errc::ConfigInvalid, "rs_buffer must be >= 0");
        if (!(rs_service_rate > 0)) throw Error(Errc::ConfigInvalid, "rs_service_rate must be > 0");
        if (rs_timeout_seconds < 0) throw Error(Errc::ConfigInvalid, "rs_timeout_seconds must be >= 0");
        if (!(block_interval_seconds > 0))
            throw Error(Errc::ConfigInvalid, "block_interval_seconds must be > 0");
        if (max_txs_per_block < 1) throw Error(Errc::ConfigInvalid, "max_txs_per_block must be >= 1");
        if (!(warmup_fraction >= 0 && warmup_fraction < 1))
            throw Error(Errc::ConfigInvalid, "warmup_fraction must be in [0, 1)");
        if (drain_factor < 0) throw Error(Errc::ConfigInvalid, "drain_factor must be >= 0");
    }
};

inline void to_json(nlohmann::json& j, const SimConfig& c) {
    j = {{"mode", mode_name(c.mode)},
         {"n_nodes", c.n_nodes},
         {"delta_seconds", c.delta_seconds},
         {"client_rate", c.client_rate},
         {"n_clients", c.n_clients},
         {"duration_seconds", c.duration_seconds},
         {"rs_buffer", c.rs_buffer},
         {"rs_service_rate", c.rs_service_rate},
         {"rs_timeout_seconds", c.rs_timeout_seconds},
         {"block_interval_seconds", c.block_interval_seconds},
         {"max_txs_per_block", c.max_txs_per_block},
         {"seed", c.seed},
         {"warmup_fraction", c.warmup_fraction},
         {"mine_empty_blocks", c.mine_empty_blocks},
         {"drain_factor", c.drain_factor}};
}

inline void from_json(const nlohmann::json& j, SimConfig& c) {
    if (!j.is_object()) throw Error(Errc::ConfigInvalid, "config must be a JSON object");
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("n_nodes")) c.n_nodes = j.at("n_nodes").get<int>();
    if (j.contains("delta_seconds")) c.delta_seconds = j.at("delta_seconds").get<double>();
    if (j.contains("client_rate")) c.client_rate = j.at("client_rate").get<double>();
    if (j.contains("n_clients")) c.n_clients = j.at("n_clients").get<int>();
    if (j.contains("duration_seconds")) c.duration_seconds = j.at("duration_seconds").get<double>();
    if (j.contains("rs_buffer")) c.rs_buffer = j.at("rs_buffer").get<int>();
    if (j.contains("rs_service_rate")) c.rs_service_rate = j.at("rs_service_rate").get<double>();
    if (j.contains("rs_timeout_seconds"))
        c.rs_timeout_seconds = j.at("rs_timeout_seconds").get<double>();
    if (j.contains("block_interval_seconds"))
        c.block_interval_seconds = j.at("block_interval_seconds").get<double>();
    if (j.contains("max_txs_per_block")) c.max_txs_per_block = j.at("max_txs_per_block").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("warmup_fraction")) c.warmup_fraction = j.at("warmup_fraction").get<double>();
    if (j.contains("mine_empty_blocks")) c.mine_empty_blocks = j.at("mine_empty_blocks").get<bool>();
    if (j.contains("drain_factor")) c.drain_factor = j.at("drain_factor").get<double>();
}

// Expected RS request rate for the legacy architecture: k * N / delta
// requests per second, a lower bound on what the RS must absorb.
inline double predicted_amplification(double client_rate, int n_nodes, double delta_seconds) {
    if (!(client_rate >= 0)) throw Error(Errc::DomainError, "client_rate must be >= 0");
    if (n_nodes < 1) throw Error(Errc::DomainError, "n_nodes must be >= 1");
    if (!(delta_seconds > 0)) throw Error(Errc::DomainError, "delta_seconds must be > 0");
    return client_rate * static_cast<double>(n_nodes) / delta_seconds;
}

struct LatencySummary {
    double mean = 0;
    double p50 = 0;
    double p95 = 0;
    std::uint64_t count = 0;
};

struct SimReport {
    // config echo
    Mode mode = Mode::Legacy;
    int n_nodes = 0;
    double delta_seconds = 0;
    double client_rate = 0;
    double duration_seconds = 0;
    std::uint64_t seed = 0;
    int rs_buffer = 0;
    double rs_service_rate = 0;

    // measurements
    std::uint64_t client_requests_total = 0;
    std::uint64_t rs_requests_total = 0;
    std::uint64_t rs_served = 0;
    std::uint64_t rs_drops = 0;
    std::uint64_t rs_in_flight_at_end = 0;
    double rs_rps_mean = 0;  // offered RS load in the measurement window
    double amplification_measured = 0;   // rs_rps_mean / client_rate
    double amplification_predicted = 0;  // n_nodes / delta_seconds
    bool consensus_converged = false;
    bool conservation_ok = false;
    LatencySummary tx_latency;
    std::uint64_t blocks_mined = 0;
    std::uint64_t forks_observed = 0;
    std::uint64_t txs_committed = 0;
    double max_gossip_delay = 0;
};

inline void to_json(nlohmann::json& j, const SimReport& r) {
    j = {{"mode", mode_name(r.mode)},
         {"n_nodes", r.n_nodes},
         {"delta_seconds", r.delta_seconds},
         {"client_rate", r.client_rate},
         {"duration_seconds", r.duration_seconds},
         {"seed", r.seed},
         {"rs_buffer", r.rs_buffer},
         {"rs_service_rate", r.rs_service_rate},
         {"client_requests_total", r.client_requests_total},
         {"rs_requests_total", r.rs_requests_total},
         {"rs_served", r.rs_served},
         {"rs_drops", r.rs_drops},
         {"rs_in_flight_at_end", r.rs_in_flight_at_end},
         {"rs_rps_mean", r.rs_rps_mean},
         {"amplification_measured", r.amplification_measured},
         {"amplification_predicted", r.amplification_predicted},
         {"consensus_converged", r.consensus_converged},
         {"conservation_ok", r.conservation_ok},
         {"tx_latency_mean", r.tx_latency.mean},
         {"tx_latency_p50", r.tx_latency.p50},
         {"tx_latency_p95", r.tx_latency.p95},
         {"tx_latency_count", r.tx_latency.count},
         {"blocks_mined", r.blocks_mined},
         {"forks_observed", r.forks_observed},
         {"txs_committed", r.txs_committed},
         {"max_gossip_delay", r.max_gossip_delay}};
}

inline void from_json(const nlohmann::json& j, SimReport& r) {
    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key))
            throw Error(Errc::ParseError, std::string("report missing field \"") + key + "\"");
        return j.at(key);
    };
    r.mode = mode_from_string(need("mode").get<std::string>());
    r.n_nodes = need("n_nodes").get<int>();
    r.delta_seconds = need("delta_seconds").get<double>();
    r.client_rate = need("client_rate").get<double>();
    r.duration_seconds = need("duration_seconds").get<double>();
    r.seed = need("seed").get<std::uint64_t>();
    r.rs_buffer = need("rs_buffer").get<int>();
    r.rs_service_rate = need("rs_service_rate").get<double>();
    r.client_requests_total = need("client_requests_total").get<std::uint64_t>();
    r.rs_requests_total = need("rs_requests_total").get<std::uint64_t>();
    r.rs_served = need("rs_served").get<std::uint64_t>();
    r.rs_drops = need("rs_drops").get<std::uint64_t>();
    r.rs_in_flight_at_end = need("rs_in_flight_at_end").get<std::uint64_t>();
    r.rs_rps_mean = need("rs_rps_mean").get<double>();
    r.amplification_measured = need("amplification_measured").get<double>();
    r.amplification_predicted = need("amplification_predicted").get<double>();
    r.consensus_converged = need("consensus_converged").get<bool>();
    r.conservation_ok = need("conservation_ok").get<bool>();
    r.tx_latency.mean = need("tx_latency_mean").get<double>();
    r.tx_latency.p50 = need("tx_latency_p50").get<double>();
    r.tx_latency.p95 = need("tx_latency_p95").get<double>();
    r.tx_latency.count = need("tx_latency_count").get<std::uint64_t>();
    r.blocks_mined = need("blocks_mined").get<std::uint64_t>();
    r.forks_observed = need("forks_observed").get<std::uint64_t>();
    r.txs_committed = need("txs_committed").get<std::uint64_t>();
    r.max_gossip_delay = need("max_gossip_delay").get<double>();
}

enum class EventKind : std::uint8_t {
    ClientRequest = 0,
    GossipDelivery = 1,
    MineComplete = 2,
    RsService = 3,
    RsTimeout = 4,
};

struct Event {
    double t = 0;
    EventKind kind = EventKind::ClientRequest;
    std::uint64_t seq = 0;  // insertion order, final tie-break
    int node = -1;          // target node / client index
    std::uint64_t a = 0;    // object id / generation / job id
    std::uint64_t b = 0;    // 0 = tx, 1 = block (GossipDelivery)
};

struct EventAfter {
    bool operator()(const Event& x, const Event& y) const {
        if (x.t != y.t) return x.t > y.t;
        if (x.kind != y.kind) return x.kind > y.kind;
        return x.seq > y.seq;
    }
};

// Single-server FIFO queue with a finite waiting room and deterministic
// service time. An arrival that finds the waiting room full is dropped;
// a queued request that waits past the timeout is dropped when its timer
// fires. Completions and timeouts are events, scheduled by the caller.
class RsQueue {
  public:
    RsQueue(int buffer, double service_rate, double timeout)
        : buffer_(buffer), service_time_(1.0 / service_rate), timeout_(timeout) {}

    struct Scheduled {
        double t;
        EventKind kind;
        std::uint64_t job = 0;
    };

    std::vector<Scheduled> arrive(double t) {
        ++arrivals_;
        if (!busy_) {
            busy_ = true;
            return {{t + service_time_, EventKind::RsService, 0}};
        }
        if (static_cast<int>(alive_.size()) < buffer_) {
            std::uint64_t id = next_job_++;
            waiting_.push_back({id, t});
            alive_.insert(id);
            if (timeout_ > 0) return {{t + timeout_, EventKind::RsTimeout, id}};
            return {};
        }
        ++dropped_;
        return {};
    }

    std::vector<Scheduled> service_complete(double t) {
        ++served_;
        busy_ = false;
        while (!waiting_.empty()) {
            auto [id, t_enq] = waiting_.front();
            waiting_.pop_front();
            if (!alive_.erase(id)) continue;  // timed out while queued
            busy_ = true;
            return {{t + service_time_, EventKind::RsService, 0}};
        }
        return {};
    }

    void timeout_fire(std::uint64_t job) {
        if (alive_.erase(job)) ++dropped_;
    }

    std::uint64_t arrivals() const { return arrivals_; }
    std::uint64_t served() const { return served_; }
    std::uint64_t dropped() const { return dropped_; }
    std::uint64_t in_flight() const { return alive_.size() + (busy_ ? 1 : 0); }
    std::uint64_t queue_depth() const { return in_flight(); }

  private:
    int buffer_;
    double service_time_;
    double timeout_;
    bool busy_ = false;
    std::deque<std::pair<std::uint64_t, double>> waiting_;
    std::unordered_set<std::uint64_t> alive_;
    std::uint64_t next_job_ = 1;
    std::uint64_t arrivals_ = 0;
    std::uint64_t served_ = 0;
    std::uint64_t dropped_ = 0;
};

struct RsAccounting {
    std::uint64_t arrivals = 0;
    std::uint64_t served = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight_at_end = 0;
};

// Runs the RS queue model alone over a fixed arrival schedule.
inline RsAccounting model_rs(std::vector<double> arrival_times, double service_rate, int buffer,
                             double timeout = 0.0) {
    if (!(service_rate > 0)) throw Error(Errc::ConfigInvalid, "rs_service_rate must be > 0");
    if (buffer < 0) throw Error(Errc::ConfigInvalid, "rs_buffer must be >= 0");
    std::sort(arrival_times.begin(), arrival_times.end());
    RsQueue q(buffer, service_rate, timeout);
    std::priority_queue<Event, std::vector<Event>, EventAfter> pq;
    std::uint64_t seq = 0;
    for (double t : arrival_times) pq.push({t, EventKind::ClientRequest, seq++, -1, 0, 0});
    auto push_all = [&](const std::vector<RsQueue::Scheduled>& v) {
        for (const auto& s : v) pq.push({s.t, s.kind, seq++, -1, s.job, 0});
    };
    while (!pq.empty()) {
        Event ev = pq.top();
        pq.pop();
        switch (ev.kind) {
            case EventKind::ClientRequest: push_all(q.arrive(ev.t)); break;
            case EventKind::RsService: push_all(q.service_complete(ev.t)); break;
            case EventKind::RsTimeout: q.timeout_fire(ev.a); break;
            default: break;
        }
    }
    return {q.arrivals(), q.served(), q.dropped(), q.in_flight()};
}

struct SeriesSample {
    double t = 0;
    std::uint64_t rs_queue_depth = 0;
    std::uint64_t rs_arrivals_total = 0;
    std::uint64_t rs_drops_total = 0;
    std::uint64_t tip_height_min = 0;
    std::uint64_t tip_height_max = 0;
};

struct SimResult {
    SimReport report;
    std::vector<SeriesSample> series;  // sampled once per simulated second
};

class Simulation {
  public:
    explicit Simulation(SimConfig cfg) : cfg_(std::move(cfg)), rs_(cfg_.rs_buffer, cfg_.rs_service_rate, cfg_.rs_timeout_seconds) {
        cfg_.validate();
    }

    SimResult run() {
        const double duration = cfg_.duration_seconds;
        const double drain = cfg_.drain_factor * (cfg_.delta_seconds + cfg_.block_interval_seconds);
        const double mine_until = duration + drain * (2.0 / 3.0);
        const double hard_end = duration + drain;
        const double window_start = cfg_.warmup_fraction * duration;

        blocks_.push_back(BlockRec{});  // genesis: id 0, height 0
        nodes_.resize(cfg_.n_nodes);
        for (int i = 0; i < cfg_.n_nodes; ++i) {
            nodes_[i].rng = std::make_unique<Rng>(derive_seed(cfg_.seed, 1000 + i));
            nodes_[i].have.insert(0);
            nodes_[i].on_path.insert(0);
            reschedule_mining(i, 0.0, mine_until);
        }
        for (int c = 0; c < cfg_.n_clients; ++c) {
            clients_.push_back({std::make_unique<Rng>(derive_seed(cfg_.seed, 2000000 + c)),
                                std::make_unique<Rng>(derive_seed(cfg_.seed, 3000000 + c))});
            double t0 = clients_[c].arrival->exponential(cfg_.n_clients / cfg_.client_rate);
            if (t0 <= duration) push({t0, EventKind::ClientRequest, seq_++, c, 0, 0});
        }

        double next_sample = 0.0;
        auto sample_until = [&](double t) {
            while (next_sample <= t && next_sample <= hard_end) {
                SeriesSample s;
                s.t = next_sample;
                s.rs_queue_depth = rs_.queue_depth();
                s.rs_arrivals_total = rs_.arrivals();
                s.rs_drops_total = rs_.dropped();
                std::uint64_t lo = ~0ull, hi = 0;
                for (const auto& n : nodes_) {
                    lo = std::min(lo, blocks_[n.tip].height);
                    hi = std::max(hi, blocks_[n.tip].height);
                }
                s.tip_height_min = lo;
                s.tip_height_max = hi;
                series_.push_back(s);
                next_sample += 1.0;
            }
        };

        while (!pq_.empty() && pq_.top().t <= hard_end) {
            Event ev = pq_.top();
            pq_.pop();
            sample_until(ev.t);
            switch (ev.kind) {
                case EventKind::ClientRequest: on_client_request(ev, duration, window_start); break;
                case EventKind::GossipDelivery:
                    if (ev.b == 0)
                        on_tx_delivery(ev);
                    else
                        on_block_delivery(ev, window_start, duration, mine_until);
                    break;
                case EventKind::MineComplete: on_mine_complete(ev, window_start, duration, mine_until); break;
                case EventKind::RsService:
                    for (const auto& s : rs_.service_complete(ev.t))
                        push({s.t, s.kind, seq_++, -1, s.job, 0});
                    break;
                case EventKind::RsTimeout: rs_.timeout_fire(ev.a); break;
            }
        }
        sample_until(hard_end);

        return assemble_report(window_start, duration);
    }

  private:
    struct BlockRec {
        std::uint64_t id = 0;
        std::uint64_t parent = 0;
        std::uint64_t height = 0;
        int miner = -1;
        double sealed_at = 0;
        std::vector<std::uint64_t> txs;
    };

    struct TxRec {
        double proposed_at = 0;
        double committed_at = -1;
    };

    struct Node {
        std::unique_ptr<Rng> rng;
        std::uint64_t tip = 0;
        std::uint64_t generation = 0;
        std::deque<std::uint64_t> mempool;
        std::unordered_set<std::uint64_t> mempool_set;
        std::unordered_set<std::uint64_t> committed;
        std::unordered_set<std::uint64_t> have;
        std::unordered_set<std::uint64_t> on_path;
        std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> pending;  // parent -> blocks
    };

    struct Client {
        std::unique_ptr<Rng> arrival;
        std::unique_ptr<Rng> gossip;
    };

    void push(Event ev) { pq_.push(ev); }

    void rs_arrive(double t, double window_start, double duration) {
        if (t >= window_start && t <= duration) ++rs_window_arrivals_;
        for (const auto& s : rs_.arrive(t)) push({s.t, s.kind, seq_++, -1, s.job, 0});
    }

    void reschedule_mining(int node, double t, double mine_until) {
        Node& n = nodes_[node];
        ++n.generation;
        double dt = n.rng->exponential(cfg_.n_nodes * cfg_.block_interval_seconds);
        if (t + dt <= mine_until + cfg_.block_interval_seconds * 100.0)  // cap far-future events
            push({t + dt, EventKind::MineComplete, seq_++, node, n.generation, 0});
    }

    void on_client_request(const Event& ev, double duration, double window_start) {
        int c = ev.node;
        double t = ev.t;
        ++client_requests_;
        std::uint64_t txid = txs_.size();
        txs_.push_back({t, -1});
        if (cfg_.mode == Mode::Proposed) rs_arrive(t, window_start, duration);
        for (int i = 0; i < cfg_.n_nodes; ++i) {
            double d = clients_[c].gossip->delay(cfg_.delta_seconds);
            push({t + d, EventKind::GossipDelivery, seq_++, i, txid, 0});
        }
        double dt = clients_[c].arrival->exponential(cfg_.n_clients / cfg_.client_rate);
        if (t + dt <= duration) push({t + dt, EventKind::ClientRequest, seq_++, c, 0, 0});
    }

    void on_tx_delivery(const Event& ev) {
        Node& n = nodes_[ev.node];
        std::uint64_t txid = ev.a;
        if (n.committed.count(txid) || n.mempool_set.count(txid)) return;
        n.mempool.push_back(txid);
        n.mempool_set.insert(txid);
    }

    // Executes one block on a node's active path: the validation re-execution
    // that, in the legacy architecture, touches the RS once per transaction.
    void execute_on_path(int node, const BlockRec& b, double t, double window_start, double duration) {
        Node& n = nodes_[node];
        n.on_path.insert(b.id);
        for (std::uint64_t txid : b.txs) {
            if (cfg_.mode == Mode::Legacy) rs_arrive(t, window_start, duration);
            n.committed.insert(txid);
            if (n.mempool_set.erase(txid)) {
                // deque entry removed lazily at pop time
            }
        }
    }

    void adopt_extend(int node, std::uint64_t bid, double t, double window_start, double duration,
                      double mine_until) {
        Node& n = nodes_[node];
        execute_on_path(node, blocks_[bid], t, window_start, duration);
        n.tip = bid;
        reschedule_mining(node, t, mine_until);
    }

    void reorg_to(int node, std::uint64_t new_tip, double t, double window_start, double duration,
                  double mine_until) {
        Node& n = nodes_[node];
        std::vector<std::uint64_t> new_path;
        std::uint64_t cursor = new_tip;
        while (!n.on_path.count(cursor)) {
            new_path.push_back(cursor);
            cursor = blocks_[cursor].parent;
        }
        std::uint64_t ancestor = cursor;

        std::vector<std::uint64_t> restored;
        cursor = n.tip;
        while (cursor != ancestor) {
            const BlockRec& b = blocks_[cursor];
            n.on_path.erase(cursor);
            for (std::uint64_t txid : b.txs) {
                n.committed.erase(txid);
                restored.push_back(txid);
            }
            cursor = b.parent;
        }

        for (auto it = new_path.rbegin(); it != new_path.rend(); ++it)
            execute_on_path(node, blocks_[*it], t, window_start, duration);
        n.tip = new_tip;

        std::sort(restored.begin(), restored.end());
        for (std::uint64_t txid : restored) {
            if (n.committed.count(txid) || n.mempool_set.count(txid)) continue;
            n.mempool.push_back(txid);
            n.mempool_set.insert(txid);
        }
        reschedule_mining(node, t, mine_until);
    }

    void try_attach(int node, std::uint64_t bid, double t, double window_start, double duration,
                    double mine_until) {
        std::vector<std::uint64_t> stack{bid};
        while (!stack.empty()) {
            std::uint64_t cur = stack.back();
            stack.pop_back();
            Node& n = nodes_[node];
            const BlockRec& b = blocks_[cur];
            if (b.parent == n.tip) {
                adopt_extend(node, cur, t, window_start, duration, mine_until);
            } else if (b.height > blocks_[n.tip].height) {
                reorg_to(node, cur, t, window_start, duration, mine_until);
            }
            auto it = n.pending.find(cur);
            if (it != n.pending.end()) {
                for (std::uint64_t child : it->second) stack.push_back(child);
                n.pending.erase(it);
            }
        }
    }

    void on_block_delivery(const Event& ev, double window_start, double duration, double mine_until) {
        Node& n = nodes_[ev.node];
        std::uint64_t bid = ev.a;
        const BlockRec& b = blocks_[bid];
        max_gossip_delay_ = std::max(max_gossip_delay_, ev.t - b.sealed_at);
        if (n.have.count(bid)) return;
        n.have.insert(bid);
        if (!n.have.count(b.parent)) {
            n.pending[b.parent].push_back(bid);
            return;
        }
        try_attach(ev.node, bid, ev.t, window_start, duration, mine_until);
    }

    void on_mine_complete(const Event& ev, double window_start, double duration, double mine_until) {
        Node& n = nodes_[ev.node];
        if (ev.a != n.generation) return;  // stale: tip changed since scheduling
        if (ev.t > mine_until) return;

        std::vector<std::uint64_t> included;
        while (!n.mempool.empty() && included.size() < static_cast<std::size_t>(cfg_.max_txs_per_block)) {
            std::uint64_t txid = n.mempool.front();
            n.mempool.pop_front();
            if (!n.mempool_set.erase(txid)) continue;  // already committed on this node's path
            included.push_back(txid);
        }
        if (included.empty() && !cfg_.mine_empty_blocks) {
            reschedule_mining(ev.node, ev.t, mine_until);
            return;
        }

        BlockRec b;
        b.id = blocks_.size();
        b.parent = n.tip;
        b.height = blocks_[n.tip].height + 1;
        b.miner = ev.node;
        b.sealed_at = ev.t;
        b.txs = included;
        blocks_.push_back(b);
        ++blocks_mined_;
        n.have.insert(b.id);

        for (std::uint64_t txid : included) {
            if (txs_[txid].committed_at < 0) txs_[txid].committed_at = ev.t;
            if (cfg_.mode == Mode::Legacy) rs_arrive(ev.t, window_start, duration);  // miner execution
        }
        // the miner validates its own block like everyone else
        adopt_extend(ev.node, b.id, ev.t, window_start, duration, mine_until);

        for (int m = 0; m < cfg_.n_nodes; ++m) {
            if (m == ev.node) continue;
            double d = n.rng->delay(cfg_.delta_seconds);
            push({ev.t + d, EventKind::GossipDelivery, seq_++, m, b.id, 1});
        }
    }

    SimResult assemble_report(double window_start, double duration) {
        SimReport r;
        r.mode = cfg_.mode;
        r.n_nodes = cfg_.n_nodes;
        r.delta_seconds = cfg_.delta_seconds;
        r.client_rate = cfg_.client_rate;
        r.duration_seconds = duration;
        r.seed = cfg_.seed;
        r.rs_buffer = cfg_.rs_buffer;
        r.rs_service_rate = cfg_.rs_service_rate;

        r.client_requests_total = client_requests_;
        r.rs_requests_total = rs_.arrivals();
        r.rs_served = rs_.served();
        r.rs_drops = rs_.dropped();
        r.rs_in_flight_at_end = rs_.in_flight();
        double window = duration - window_start;
        r.rs_rps_mean = window > 0 ? rs_window_arrivals_ / window : 0.0;
        r.amplification_measured = cfg_.client_rate > 0 ? r.rs_rps_mean / cfg_.client_rate : 0.0;
        r.amplification_predicted = static_cast<double>(cfg_.n_nodes) / cfg_.delta_seconds;
        r.conservation_ok =
            rs_.arrivals() == rs_.served() + rs_.dropped() + rs_.in_flight();

        bool converged = true;
        for (const auto& n : nodes_)
            if (n.tip != nodes_[0].tip) converged = false;
        r.consensus_converged = converged;

        std::vector<double> lat;
        for (const auto& tx : txs_)
            if (tx.committed_at >= 0) lat.push_back(tx.committed_at - tx.proposed_at);
        r.txs_committed = lat.size();
        if (!lat.empty()) {
            std::sort(lat.begin(), lat.end());
            double sum = 0;
            for (double x : lat) sum += x;
            r.tx_latency.count = lat.size();
            r.tx_latency.mean = sum / lat.size();
            r.tx_latency.p50 = lat[(lat.size() - 1) / 2];
            r.tx_latency.p95 = lat[(lat.size() - 1) * 95 / 100];
        }
        r.blocks_mined = blocks_mined_;
        std::uint64_t tip_height = blocks_[nodes_[0].tip].height;
        r.forks_observed = blocks_mined_ >= tip_height ? blocks_mined_ - tip_height : 0;
        r.max_gossip_delay = max_gossip_delay_;
        return {r, std::move(series_)};
    }

    SimConfig cfg_;
    RsQueue rs_;
    std::priority_queue<Event, std::vector<Event>, EventAfter> pq_;
    std::uint64_t seq_ = 0;
    std::vector<Node> nodes_;
    std::vector<Client> clients_;
    std::vector<BlockRec> blocks_;
    std::vector<TxRec> txs_;
    std::vector<SeriesSample> series_;
    std::uint64_t client_requests_ = 0;
    std::uint64_t rs_window_arrivals_ = 0;
    std::uint64_t blocks_mined_ = 0;
    double max_gossip_delay_ = 0;
};

inline SimResult run_simulation_full(const SimConfig& cfg) { return Simulation(cfg).run(); }

inline SimReport run_simulation(const SimConfig& cfg) { return run_simulation_full(cfg).report; }

// Sweeps one config axis. Each cell gets its own seed derived from
// (base seed, cell index) so cells are independent but reproducible.
inline std::vector<SimReport> run_sweep(const SimConfig& base, const std::string& axis,
                                        const std::vector<double>& values) {
    std::vector<SimReport> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        SimConfig cfg = base;
        double v = values[i];
        if (axis == "n_nodes") {
            cfg.n_nodes = static_cast<int>(v);
        } else if (axis == "client_rate") {
            cfg.client_rate = v;
        } else if (axis == "rs_buffer") {
            cfg.rs_buffer = static_cast<int>(v);
        } else if (axis == "delta_seconds") {
            cfg.delta_seconds = v;
        } else {
            throw Error(Errc::UnknownAxis, "no sweep axis named \"" + axis + "\"");
        }
        cfg.seed = derive_seed(base.seed, i);
        cfg.validate();
        out.push_back(run_simulation(cfg));
    }
    return out;
}

inline std::string series_to_csv(const std::vector<SeriesSample>& series) {
    std::string out = "t,rs_queue_depth,rs_arrivals_total,rs_drops_total,tip_height_min,tip_height_max\n";
    for (const auto& s : series) {
        out += std::to_string(s.t) + "," + std::to_string(s.rs_queue_depth) + "," +
               std::to_string(s.rs_arrivals_total) + "," + std::to_string(s.rs_drops_total) + "," +
               std::to_string(s.tip_height_min) + "," + std::to_string(s.tip_height_max) + "\n";
    }
    return out;
}

}  // namespace permchain::sim
