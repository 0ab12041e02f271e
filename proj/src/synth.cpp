#include "aclust/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace aclust {

namespace {

constexpr std::uint64_t kMaxPerTx = 32;

std::uint64_t mix64(std::uint64_t x) noexcept {
    // splitmix64 finaliser; a bijection on 64-bit words.
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

std::string base58_address(std::uint64_t word) {
    static constexpr char kAlphabet[] = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
    std::string out(12, '1');
    for (std::size_t i = 11; i >= 1; --i) {
        out[i] = kAlphabet[word % 58];
        word /= 58;
    }
    return out;
}

struct Utxo {
    OutPoint outpoint;
    Satoshi value = 0;
};

enum class Role : std::uint8_t { FanOutA, FanOutB, SweepA, SweepB, Merge };

class Generator {
  public:
    explicit Generator(const SynthParams& p)
        : p_(p), rng_(p.seed), address_salt_(mix64(p.seed ^ 0x5bd1e995u)), txid_salt_(mix64(p.seed + 0x27d4eb2fu)) {
        for (const auto& inj : p.injections) {
            schedule_[inj.ordinal - 4] = {Role::FanOutA, inj.cluster_size};
            schedule_[inj.ordinal - 3] = {Role::FanOutB, inj.cluster_size};
            schedule_[inj.ordinal - 2] = {Role::SweepA, inj.cluster_size};
            schedule_[inj.ordinal - 1] = {Role::SweepB, inj.cluster_size};
            schedule_[inj.ordinal] = {Role::Merge, inj.cluster_size};
        }
    }

    std::vector<TxRecord> run() {
        std::vector<TxRecord> out;
        out.reserve(p_.num_transactions);
        double clock = static_cast<double>(p_.start_time);
        for (Ordinal ord = 0; ord < p_.num_transactions; ++ord) {
            TxRecord tx;
            tx.ordinal = ord;
            tx.txid = make_txid(ord);
            tx.timestamp = static_cast<std::uint64_t>(clock);
            if (tx.timestamp > 0xFFFFFFFFull) throw Error(Errc::InvalidParams, "timestamps overflow 32 bits");
            clock += -p_.mean_gap_seconds * std::log(uniform_open());

            if (auto it = schedule_.find(ord); it != schedule_.end()) {
                scripted(tx, it->second.first, it->second.second);
            } else if (ord % p_.coinbase_every == 0 || pool_.empty()) {
                coinbase(tx);
            } else {
                ordinary(tx);
            }
            out.push_back(std::move(tx));
        }
        return out;
    }

  private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double uniform_open() { return 1.0 - uniform(); }  // (0, 1]
    std::uint64_t below(std::uint64_t n) { return rng_() % n; }

    std::uint64_t geometric(double mean) {
        if (mean <= 1.0) return 1;
        const double p = 1.0 / mean;
        const double draw = std::floor(std::log(uniform_open()) / std::log1p(-p));
        return 1 + std::min<std::uint64_t>(static_cast<std::uint64_t>(draw), kMaxPerTx - 1);
    }

    Txid make_txid(Ordinal ord) const {
        Txid id{};
        std::uint64_t words[4] = {mix64(ord ^ txid_salt_), 0, 0, 0};
        for (int i = 1; i < 4; ++i) words[i] = mix64(words[i - 1] + txid_salt_);
        for (std::size_t i = 0; i < 32; ++i) id[i] = static_cast<std::uint8_t>(words[i / 8] >> (8 * (i % 8)));
        return id;
    }

    std::uint64_t fresh_address() { return addresses_++; }
    std::string name(std::uint64_t address) const { return base58_address(mix64(address ^ address_salt_)); }

    std::string sample_address() {
        if (addresses_ > 0 && uniform() < p_.p_reuse) return name(below(addresses_));
        return name(fresh_address());
    }

    void add_output(TxRecord& tx, TxOutputDecl out, bool spendable = true) {
        const auto vout = static_cast<std::uint32_t>(tx.outputs.size());
        if (spendable && out.script_class.kind != ScriptKind::OpReturn) {
            pool_.push_back({OutPoint{tx.txid, vout}, out.value});
        }
        tx.outputs.push_back(std::move(out));
    }

    Utxo take(std::size_t index) {
        Utxo u = pool_[index];
        pool_[index] = pool_.back();
        pool_.pop_back();
        return u;
    }

    void coinbase(TxRecord& tx) {
        tx.inputs.push_back(OutPoint::coinbase());
        add_output(tx, {p_.coinbase_reward, ScriptClass::p2pkh(), {sample_address()}});
    }

    void ordinary(TxRecord& tx) {
        const auto n_in = std::min<std::uint64_t>(geometric(p_.mean_inputs), pool_.size());
        Satoshi total = 0;
        for (std::uint64_t i = 0; i < n_in; ++i) {
            const Utxo u = take(below(pool_.size()));
            tx.inputs.push_back(u.outpoint);
            total += u.value;
        }

        const auto n_out = geometric(p_.mean_outputs);
        std::vector<ScriptClass> classes(n_out);
        for (auto& cls : classes) {
            const double r = uniform();
            if (r < p_.frac_op_return) {
                cls = ScriptClass::op_return();
            } else if (r < p_.frac_op_return + p_.frac_multisig) {
                const auto n = static_cast<std::uint8_t>(2 + below(2));
                cls = ScriptClass::multisig(static_cast<std::uint8_t>(1 + below(n)), n);
            } else {
                cls = ScriptClass::p2pkh();
            }
        }
        const auto valued = static_cast<std::size_t>(
            std::count_if(classes.begin(), classes.end(), [](ScriptClass c) { return c.kind != ScriptKind::OpReturn; }));
        if (valued == 0) classes.back() = ScriptClass::p2pkh();

        // Split the input value exactly across value-bearing outputs.
        std::vector<Satoshi> cuts;
        const auto n_valued = std::max<std::size_t>(valued, 1);
        for (std::size_t i = 0; i + 1 < n_valued; ++i) cuts.push_back(total == 0 ? 0 : below(total + 1));
        std::sort(cuts.begin(), cuts.end());
        cuts.push_back(total);
        Satoshi prev = 0;
        std::size_t next_cut = 0;

        for (const auto cls : classes) {
            TxOutputDecl out;
            out.script_class = cls;
            if (cls.kind != ScriptKind::OpReturn) {
                out.value = cuts[next_cut] - prev;
                prev = cuts[next_cut++];
                const auto slots = script_arity(cls).min;
                for (std::size_t s = 0; s < slots; ++s) out.addresses.push_back(sample_address());
            }
            add_output(tx, std::move(out));
        }
    }

    void scripted(TxRecord& tx, Role role, std::uint32_t size) {
        switch (role) {
            case Role::FanOutA:
            case Role::FanOutB: {
                auto& wallet = role == Role::FanOutA ? wallet_a_ : wallet_b_;
                auto& addrs = role == Role::FanOutA ? wallet_a_addr_ : wallet_b_addr_;
                wallet.clear();
                addrs.clear();
                tx.inputs.push_back(OutPoint::coinbase());
                const Satoshi each = p_.coinbase_reward / size;
                for (std::uint32_t i = 0; i < size; ++i) {
                    const auto addr = fresh_address();
                    wallet.push_back({OutPoint{tx.txid, i}, each});
                    addrs.push_back(addr);
                    add_output(tx, {each, ScriptClass::p2pkh(), {name(addr)}}, /*spendable=*/false);
                }
                break;
            }
            case Role::SweepA:
            case Role::SweepB: {
                const bool a = role == Role::SweepA;
                auto& wallet = a ? wallet_a_ : wallet_b_;
                auto& addrs = a ? wallet_a_addr_ : wallet_b_addr_;
                Satoshi total = 0;
                for (const auto& u : wallet) {
                    tx.inputs.push_back(u.outpoint);
                    total += u.value;
                }
                // Pays back to the wallet's first address so the cluster keeps a spendable output.
                add_output(tx, {total, ScriptClass::p2pkh(), {name(addrs.front())}}, false);
                if (a) {
                    sweep_a_ = {OutPoint{tx.txid, 0}, total};
                } else {
                    sweep_b_ = {OutPoint{tx.txid, 0}, total};
                }
                addrs.clear();
                wallet.clear();
                break;
            }
            case Role::Merge: {
                tx.inputs.push_back(sweep_a_.outpoint);
                tx.inputs.push_back(sweep_b_.outpoint);
                add_output(tx, {sweep_a_.value + sweep_b_.value, ScriptClass::p2pkh(), {name(fresh_address())}});
                break;
            }
        }
    }

    const SynthParams& p_;
    std::mt19937_64 rng_;
    std::uint64_t address_salt_;
    std::uint64_t txid_salt_;
    std::uint64_t addresses_ = 0;
    std::vector<Utxo> pool_;
    std::map<Ordinal, std::pair<Role, std::uint32_t>> schedule_;
    std::vector<Utxo> wallet_a_, wallet_b_;
    std::vector<std::uint64_t> wallet_a_addr_, wallet_b_addr_;
    Utxo sweep_a_, sweep_b_;
};

bool unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void check_params(const SynthParams& p) {
    auto fail = [](const std::string& what) { throw Error(Errc::InvalidParams, what); };
    if (!unit_interval(p.p_reuse)) fail("p_reuse must lie in [0, 1]");
    if (!(p.mean_inputs >= 1.0) || !(p.mean_outputs >= 1.0)) fail("mean inputs/outputs must be >= 1");
    if (!unit_interval(p.frac_op_return) || !unit_interval(p.frac_multisig) ||
        p.frac_op_return + p.frac_multisig > 1.0) {
        fail("output class fractions must lie in [0, 1] and sum to at most 1");
    }
    if (p.coinbase_every == 0) fail("coinbase_every must be >= 1");
    if (!(p.mean_gap_seconds >= 0.0)) fail("mean gap must be non-negative");
    if (p.start_time > 0xFFFFFFFFull) fail("start time must fit 32 bits");

    auto injections = p.injections;
    std::sort(injections.begin(), injections.end(),
              [](const auto& a, const auto& b) { return a.ordinal < b.ordinal; });
    Ordinal previous = 0;
    for (std::size_t i = 0; i < injections.size(); ++i) {
        const auto& inj = injections[i];
        if (inj.ordinal < 4 || inj.ordinal >= p.num_transactions) fail("injection ordinal out of range");
        if (i > 0 && inj.ordinal < previous + 5) fail("injections need at least 5 ordinals between them");
        if (inj.cluster_size < 2) fail("injected cluster size must be >= 2");
        if (p.coinbase_reward / inj.cluster_size == 0) fail("injected cluster size exceeds the coinbase reward");
        previous = inj.ordinal;
    }
}

std::vector<TxRecord> generate_synthetic(const SynthParams& params) {
    check_params(params);
    return Generator(params).run();
}

}  // namespace aclust
