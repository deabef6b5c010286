#pragma once

/// In-process message-passing harness. Each logical rank of a process grid
/// runs the same program on its own thread; the only cross-rank channels are
/// the blocking operations on RankContext (send/recv and the collectives).
/// Collective results are combined in ascending member order, so numerical
/// results are identical regardless of thread scheduling, and a ledger
/// counts every message and payload word each rank sends and receives.
///
/// Two execution modes must agree bit-for-bit: `serialized` hands a baton
/// to the lowest-indexed runnable rank and detects deadlock exactly (no
/// runnable rank left), while `concurrent` lets all rank threads run freely
/// and converts a blocking-operation timeout into the same DeadlockError.
///
/// The reference collectives are deliberately naive (gather to the first
/// member plus a fan-out, exact fixed-order summation); the analytic cost
/// model prices idealized collectives instead, so ledger volumes are only
/// comparable against the naive algorithms documented on each operation.

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "tuckit/grid.hpp"
#include "tuckit/memory.hpp"

namespace tuckit {

/// Raised (out of Simulator::run) when ranks can no longer make progress:
/// an unmatched send/recv or collective in serialized mode, or a blocking
/// operation exceeding the deadlock timeout in concurrent mode.
class DeadlockError : public std::runtime_error {
public:
    explicit DeadlockError(const std::string& what) : std::runtime_error(what) {}
};

enum class ExecMode {
    serialized,  ///< one rank at a time, lowest runnable first; exact deadlock detection
    concurrent,  ///< free-running threads; deadlock via blocking-op timeout
};

enum class CommOp : std::size_t {
    point_to_point = 0,
    reduce = 1,
    all_reduce = 2,
    all_gather = 3,
};

inline constexpr std::size_t kCommOpCount = 4;

inline const char* to_string(CommOp op) {
    switch (op) {
        case CommOp::point_to_point: return "point_to_point";
        case CommOp::reduce: return "reduce";
        case CommOp::all_reduce: return "all_reduce";
        case CommOp::all_gather: return "all_gather";
    }
    throw std::invalid_argument("unknown communication operation");
}

struct CommCounters {
    std::uint64_t messages_sent = 0;
    std::uint64_t words_sent = 0;
    std::uint64_t words_received = 0;

    CommCounters& operator+=(const CommCounters& other) {
        messages_sent += other.messages_sent;
        words_sent += other.words_sent;
        words_received += other.words_received;
        return *this;
    }
};

/// Per-rank, per-operation traffic counters. One payload word is one 64-bit
/// float. Counters only ever grow during execution; snapshots are values.
struct CommLedger {
    std::vector<std::array<CommCounters, kCommOpCount>> per_rank;

    [[nodiscard]] const CommCounters& at(std::size_t rank, CommOp op) const {
        return per_rank.at(rank)[static_cast<std::size_t>(op)];
    }

    [[nodiscard]] CommCounters rank_total(std::size_t rank) const {
        CommCounters total;
        for (const CommCounters& counters : per_rank.at(rank)) total += counters;
        return total;
    }

    [[nodiscard]] CommCounters op_total(CommOp op) const {
        CommCounters total;
        for (const auto& rank : per_rank) total += rank[static_cast<std::size_t>(op)];
        return total;
    }

    [[nodiscard]] CommCounters grand_total() const {
        CommCounters total;
        for (std::size_t op = 0; op < kCommOpCount; ++op) {
            total += op_total(static_cast<CommOp>(op));
        }
        return total;
    }

    friend bool operator==(const CommLedger& a, const CommLedger& b) {
        if (a.per_rank.size() != b.per_rank.size()) return false;
        for (std::size_t r = 0; r < a.per_rank.size(); ++r) {
            for (std::size_t op = 0; op < kCommOpCount; ++op) {
                const CommCounters& x = a.per_rank[r][op];
                const CommCounters& y = b.per_rank[r][op];
                if (x.messages_sent != y.messages_sent || x.words_sent != y.words_sent ||
                    x.words_received != y.words_received) {
                    return false;
                }
            }
        }
        return true;
    }
};

/// Plain-text ledger dump: one line per rank per operation plus totals.
inline void write_ledger_report(std::ostream& out, const CommLedger& ledger) {
    out << "rank  operation       messages_sent  words_sent  words_received\n";
    for (std::size_t r = 0; r < ledger.per_rank.size(); ++r) {
        for (std::size_t op = 0; op < kCommOpCount; ++op) {
            const CommCounters& c = ledger.per_rank[r][op];
            out << r << "  " << to_string(static_cast<CommOp>(op)) << "  " << c.messages_sent
                << "  " << c.words_sent << "  " << c.words_received << '\n';
        }
    }
    const CommCounters total = ledger.grand_total();
    out << "total  all  " << total.messages_sent << "  " << total.words_sent << "  "
        << total.words_received << '\n';
}

namespace detail {

/// Internal unwind signal for ranks interrupted by another rank's failure.
struct AbortedError {};

struct CollectiveSlot {
    std::size_t group_size = 0;
    std::size_t arrived = 0;
    std::size_t copied = 0;
    bool ready = false;
    bool width_set = false;
    std::size_t width = 0;  // common element count (reduce/all_reduce)
    std::vector<std::span<const double>> contributions;
    std::vector<double> result;  // harness staging; deliberately unmetered
};

using SlotSignature = std::tuple<CommOp, std::size_t /*root*/, std::vector<std::size_t>>;
using SlotKey = std::pair<SlotSignature, std::size_t /*sequence*/>;

struct SimState {
    ProcessGrid grid;
    ExecMode mode;
    std::chrono::milliseconds deadlock_timeout{10000};

    std::mutex mu;
    std::condition_variable cv;

    // Scheduling (guarded by mu).
    std::size_t active = 0;
    std::vector<std::optional<std::function<bool()>>> wait_pred;
    std::vector<bool> finished;
    bool deadlock = false;
    bool aborted = false;
    std::vector<std::exception_ptr> errors;

    // Messaging (guarded by mu).
    std::map<std::pair<std::size_t, std::size_t>, std::deque<std::vector<double>>> mailboxes;
    std::map<SlotKey, CollectiveSlot> slots;
    std::map<SlotSignature, std::vector<std::size_t>> call_counts;  // per member rank

    // Accounting. Ledger guarded by mu; meters are internally atomic.
    CommLedger ledger;
    std::vector<MemoryMeter> meters;

    SimState(ProcessGrid g, ExecMode m)
        : grid(std::move(g)), mode(m), meters(grid.size()) {
        ledger.per_rank.resize(grid.size());
    }

    void throw_if_dead() const {
        if (aborted) throw AbortedError{};
        if (deadlock) throw DeadlockError("harness already stopped on deadlock");
    }

    /// Hands the baton to the lowest-indexed unfinished rank whose wait
    /// predicate holds; flags deadlock when no such rank exists. Serialized
    /// mode only; caller holds mu and is yielding.
    void schedule() {
        bool any_unfinished = false;
        for (std::size_t r = 0; r < finished.size(); ++r) {
            if (finished[r]) continue;
            any_unfinished = true;
            if (wait_pred[r] && (*wait_pred[r])()) {
                active = r;
                cv.notify_all();
                return;
            }
        }
        if (any_unfinished) deadlock = true;
        cv.notify_all();
    }

    /// Blocks the calling rank until pred() holds. Caller holds lock.
    void block(std::unique_lock<std::mutex>& lock, std::size_t rank,
               const std::function<bool()>& pred) {
        if (pred()) return;
        if (mode == ExecMode::serialized) {
            wait_pred[rank] = pred;
            schedule();
            cv.wait(lock, [&] { return aborted || deadlock || (active == rank && pred()); });
            wait_pred[rank].reset();
            if (aborted) throw AbortedError{};
            if (deadlock) throw DeadlockError("ranks are mutually blocked");
        } else {
            const auto deadline = std::chrono::steady_clock::now() + deadlock_timeout;
            while (!pred()) {
                if (aborted) throw AbortedError{};
                if (deadlock) throw DeadlockError("ranks are mutually blocked");
                if (cv.wait_until(lock, deadline) == std::cv_status::timeout) {
                    if (pred()) return;
                    deadlock = true;
                    cv.notify_all();
                    throw DeadlockError("blocking operation timed out; ranks are stuck");
                }
            }
        }
    }

    CommCounters& counters(std::size_t rank, CommOp op) {
        return ledger.per_rank[rank][static_cast<std::size_t>(op)];
    }
};

}  // namespace detail

/// Handle a rank program uses to talk to its peers. Valid only inside
/// Simulator::run, on the rank thread it was created for.
class RankContext {
public:
    RankContext(detail::SimState& state, std::size_t rank) : state_(&state), rank_(rank) {}

    [[nodiscard]] std::size_t rank() const { return rank_; }
    [[nodiscard]] const ProcessGrid& grid() const { return state_->grid; }
    [[nodiscard]] std::vector<std::size_t> coords() const {
        return state_->grid.coords_of(rank_);
    }
    [[nodiscard]] MemoryMeter& meter() { return state_->meters[rank_]; }

    /// Buffered, non-blocking send: the payload is copied into the
    /// harness mailbox and the sender continues immediately.
    void send(std::size_t dest, std::span<const double> payload) {
        if (dest == rank_) throw std::invalid_argument("a rank cannot send to itself");
        if (dest >= state_->grid.size()) {
            throw std::invalid_argument("destination rank out of range");
        }
        std::unique_lock<std::mutex> lock(state_->mu);
        state_->throw_if_dead();
        state_->mailboxes[{rank_, dest}].emplace_back(payload.begin(), payload.end());
        CommCounters& c = state_->counters(rank_, CommOp::point_to_point);
        c.messages_sent += 1;
        c.words_sent += payload.size();
        state_->cv.notify_all();
    }

    /// Blocks until a message from `src` is available; messages on one
    /// (src, dest) channel are delivered in send order.
    DVec recv(std::size_t src) {
        if (src == rank_) throw std::invalid_argument("a rank cannot receive from itself");
        if (src >= state_->grid.size()) throw std::invalid_argument("source rank out of range");
        std::unique_lock<std::mutex> lock(state_->mu);
        state_->throw_if_dead();
        detail::SimState* st = state_;
        const std::pair<std::size_t, std::size_t> channel{src, rank_};
        st->block(lock, rank_, [st, channel] {
            const auto it = st->mailboxes.find(channel);
            return it != st->mailboxes.end() && !it->second.empty();
        });
        std::deque<std::vector<double>>& queue = st->mailboxes[channel];
        const std::vector<double> payload = std::move(queue.front());
        queue.pop_front();
        state_->counters(rank_, CommOp::point_to_point).words_received += payload.size();
        return DVec(payload.begin(), payload.end());
    }

    /// Elementwise sum of every member's buffer, delivered to the member
    /// with index `root_member` in the group (others receive an empty
    /// buffer). Summation runs in ascending member order regardless of
    /// arrival order. Naive algorithm: every other member sends its buffer
    /// to the root.
    DVec reduce(const FiberGroup& group, std::span<const double> local,
                std::size_t root_member) {
        if (root_member >= group.size()) {
            throw std::invalid_argument("reduce root index out of range");
        }
        return run_collective(CommOp::reduce, group, local, root_member);
    }

    /// Elementwise sum delivered to every member. Naive algorithm: gather
    /// to the first member, which fans the result back out.
    DVec all_reduce(const FiberGroup& group, std::span<const double> local) {
        return run_collective(CommOp::all_reduce, group, local, 0);
    }

    /// Concatenation of every member's buffer in ascending member order,
    /// delivered to every member. Buffers may have distinct lengths. Naive
    /// algorithm: every member sends its buffer to every other member.
    DVec all_gather(const FiberGroup& group, std::span<const double> local) {
        return run_collective(CommOp::all_gather, group, local, 0);
    }

private:
    void validate_group(const FiberGroup& group) const {
        if (group.members.empty()) throw std::invalid_argument("empty communication group");
        std::size_t previous = 0;
        for (std::size_t i = 0; i < group.members.size(); ++i) {
            const std::size_t member = group.members[i];
            if (member >= state_->grid.size()) {
                throw std::invalid_argument("group member rank out of range");
            }
            if (i > 0 && member <= previous) {
                throw std::invalid_argument("group members must be strictly ascending");
            }
            previous = member;
        }
    }

    DVec run_collective(CommOp op, const FiberGroup& group, std::span<const double> local,
                        std::size_t root_member) {
        validate_group(group);
        const std::size_t me = group.member_index_of(rank_);
        const std::size_t k = group.size();

        detail::SimState* st = state_;
        std::unique_lock<std::mutex> lock(st->mu);
        st->throw_if_dead();

        const detail::SlotSignature signature{op, op == CommOp::reduce ? root_member : 0,
                                              group.members};
        std::vector<std::size_t>& counts = st->call_counts[signature];
        if (counts.empty()) counts.resize(k, 0);
        const std::size_t sequence = counts[me]++;
        const detail::SlotKey key{signature, sequence};
        detail::CollectiveSlot& slot = st->slots[key];
        if (slot.group_size == 0) {
            slot.group_size = k;
            slot.contributions.resize(k);
        }
        if (op != CommOp::all_gather) {
            if (!slot.width_set) {
                slot.width_set = true;
                slot.width = local.size();
            } else if (slot.width != local.size()) {
                // Unwinds to the worker's catch-all, which aborts the run
                // and releases the members already parked in this slot.
                throw std::invalid_argument(
                    "collective buffer lengths do not match across the group");
            }
        }
        slot.contributions[me] = local;
        slot.arrived += 1;
        charge_collective(op, me, k, root_member, local.size());

        if (slot.arrived == k) {
            combine(op, slot);
            st->cv.notify_all();
        } else {
            detail::CollectiveSlot* s = &slot;
            st->block(lock, rank_, [s] { return s->ready; });
        }

        DVec out;
        if (op == CommOp::all_gather) {
            st->counters(rank_, CommOp::all_gather).words_received +=
                slot.result.size() - local.size();
            out.assign(slot.result.begin(), slot.result.end());
        } else if (op == CommOp::all_reduce || me == root_member) {
            out.assign(slot.result.begin(), slot.result.end());
        }
        slot.copied += 1;
        if (slot.copied == k) {
            // Safe: every member has exited the slot by now, and the lock
            // has been held continuously since this rank's own exit.
            st->slots.erase(key);
        }
        return out;
    }

    /// Ledger charges for the naive collective algorithms, applied once per
    /// member at contribution time (all_gather receive volume depends on
    /// the other members' buffers and is charged at copy-out instead).
    /// A group of one moves nothing and charges nothing.
    void charge_collective(CommOp op, std::size_t me, std::size_t k, std::size_t root_member,
                           std::size_t words) {
        if (k <= 1) return;
        const std::uint64_t w = words;
        const std::uint64_t others = k - 1;
        CommCounters& c = state_->counters(rank_, op);
        switch (op) {
            case CommOp::reduce:
                // Every non-root member sends its buffer to the root.
                if (me == root_member) {
                    c.words_received += others * w;
                } else {
                    c.messages_sent += 1;
                    c.words_sent += w;
                }
                break;
            case CommOp::all_reduce:
                // Gather to the first member, then fan the sum back out.
                if (me == 0) {
                    c.messages_sent += others;
                    c.words_sent += others * w;
                    c.words_received += others * w;
                } else {
                    c.messages_sent += 1;
                    c.words_sent += w;
                    c.words_received += w;
                }
                break;
            case CommOp::all_gather:
                // Every member sends its buffer to every other member.
                c.messages_sent += others;
                c.words_sent += others * w;
                break;
            case CommOp::point_to_point:
                throw std::logic_error("point-to-point traffic is charged at send/recv");
        }
    }

    void combine(CommOp op, detail::CollectiveSlot& slot) {
        if (op == CommOp::all_gather) {
            std::size_t total = 0;
            for (const auto& contribution : slot.contributions) total += contribution.size();
            slot.result.clear();
            slot.result.reserve(total);
            for (const auto& contribution : slot.contributions) {
                slot.result.insert(slot.result.end(), contribution.begin(), contribution.end());
            }
        } else {
            slot.result.assign(slot.contributions[0].begin(), slot.contributions[0].end());
            for (std::size_t i = 1; i < slot.contributions.size(); ++i) {
                const std::span<const double> contribution = slot.contributions[i];
                for (std::size_t j = 0; j < contribution.size(); ++j) {
                    slot.result[j] += contribution[j];
                }
            }
        }
        slot.ready = true;
    }

    detail::SimState* state_;
    std::size_t rank_;
};

/// Owns the grid, the per-rank memory meters, and the ledger; runs rank
/// programs to completion under either execution mode.
class Simulator {
public:
    explicit Simulator(ProcessGrid grid, ExecMode mode = ExecMode::serialized)
        : state_(std::make_unique<detail::SimState>(std::move(grid), mode)) {}

    [[nodiscard]] const ProcessGrid& grid() const { return state_->grid; }
    [[nodiscard]] ExecMode mode() const { return state_->mode; }

    /// Maximum time one blocking operation may wait in concurrent mode
    /// before the run is declared deadlocked.
    void set_deadlock_timeout(std::chrono::milliseconds timeout) {
        state_->deadlock_timeout = timeout;
    }

    /// Runs `program` once on every rank. Rank-thread allocations are
    /// charged to that rank's meter. Rethrows the lowest-ranked failure;
    /// unmatched operations raise DeadlockError.
    void run(const std::function<void(RankContext&)>& program) {
        detail::SimState& st = *state_;
        const std::size_t ranks = st.grid.size();
        {
            std::lock_guard<std::mutex> lock(st.mu);
            st.mailboxes.clear();
            st.slots.clear();
            st.call_counts.clear();
            st.finished.assign(ranks, false);
            st.wait_pred.assign(ranks, std::nullopt);
            if (st.mode == ExecMode::serialized) {
                for (std::size_t r = 0; r < ranks; ++r) {
                    st.wait_pred[r] = [] { return true; };
                }
            }
            st.active = 0;
            st.deadlock = false;
            st.aborted = false;
            st.errors.assign(ranks, nullptr);
        }

        std::vector<std::thread> threads;
        threads.reserve(ranks);
        for (std::size_t r = 0; r < ranks; ++r) {
            threads.emplace_back([&st, &program, r] { run_rank(st, program, r); });
        }
        for (std::thread& thread : threads) thread.join();

        for (std::size_t r = 0; r < ranks; ++r) {
            if (st.errors[r]) std::rethrow_exception(st.errors[r]);
        }
    }

    /// Copy of the traffic counters. Call between runs (quiescent harness).
    [[nodiscard]] CommLedger ledger_snapshot() const {
        std::lock_guard<std::mutex> lock(state_->mu);
        return state_->ledger;
    }

    void reset_ledger() {
        std::lock_guard<std::mutex> lock(state_->mu);
        for (auto& rank : state_->ledger.per_rank) rank.fill(CommCounters{});
    }

    [[nodiscard]] MemoryMeter& rank_meter(std::size_t rank) {
        return state_->meters.at(rank);
    }

    [[nodiscard]] std::int64_t peak_memory_words(std::size_t rank) const {
        return state_->meters.at(rank).peak_words();
    }

private:
    static void run_rank(detail::SimState& st, const std::function<void(RankContext&)>& program,
                         std::size_t rank) {
        MeterScope scope(&st.meters[rank]);
        RankContext ctx(st, rank);
        try {
            {
                std::unique_lock<std::mutex> lock(st.mu);
                if (st.mode == ExecMode::serialized) {
                    st.cv.wait(lock, [&] { return st.aborted || st.active == rank; });
                    if (st.aborted) throw detail::AbortedError{};
                    st.wait_pred[rank].reset();
                }
            }
            program(ctx);
            std::unique_lock<std::mutex> lock(st.mu);
            st.finished[rank] = true;
            if (st.mode == ExecMode::serialized && !st.aborted && !st.deadlock) {
                st.schedule();
            } else {
                st.cv.notify_all();
            }
        } catch (const detail::AbortedError&) {
            std::lock_guard<std::mutex> lock(st.mu);
            st.finished[rank] = true;
            st.cv.notify_all();
        } catch (...) {
            std::lock_guard<std::mutex> lock(st.mu);
            st.finished[rank] = true;
            st.errors[rank] = std::current_exception();
            st.aborted = true;
            st.cv.notify_all();
        }
    }

    std::unique_ptr<detail::SimState> state_;
};

}  // namespace tuckit
