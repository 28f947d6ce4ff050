#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "greenlinks/engine.hpp"
#include "greenlinks/identity.hpp"
#include "greenlinks/random.hpp"
#include "greenlinks/sync.hpp"

namespace greenlinks::apps {

using topology::NodeId;

enum class AppErrc : std::uint8_t {
  invalid_listing,
  not_registered,
  backhaul_down,
  timeout,
  listing_not_found,
  sold_out,
  invalid_trace,
  invalid_message,
  no_messages,
  parse_error,
  queue_full,
};
[[nodiscard]] std::string_view to_string(AppErrc code) noexcept;

[[nodiscard]] AppErrc from_sync(sync::SyncErrc code) noexcept;

/// Splits `text` into SMS-sized pieces, breaking after newlines where it
/// can. Joining the pieces gives back `text`.
[[nodiscard]] std::vector<std::string> chunk_sms(std::string_view text, std::size_t limit = 140);

// ---------------------------------------------------------------------------
// Marketplace

struct Listing {
  std::string id;
  std::string item;
  double price = 0.0;
  std::uint32_t quantity = 0;
  std::string seller;

  bool operator==(const Listing&) const = default;
};

[[nodiscard]] std::string encode_listing(const Listing& l);
[[nodiscard]] std::optional<Listing> decode_listing(std::string_view id, std::string_view value);

// SMS command grammar, version 1:
//   SELL <item> <qty> <price>
//   BUY <listing_id>
//   SEARCH <item>
// Keywords are case-insensitive; items are single words.
struct SellCommand {
  std::string item;
  std::uint32_t quantity = 0;
  double price = 0.0;
};
struct BuyCommand {
  std::string listing_id;
};
struct SearchCommand {
  std::string item;
};
using Command = std::variant<SellCommand, BuyCommand, SearchCommand>;

struct ParseResult {
  std::optional<Command> command;
  std::string error;
};
[[nodiscard]] ParseResult parse_command(std::string_view text);

struct SellResult {
  std::optional<AppErrc> error;
  std::string listing_id;
  SimTime acked_at = 0.0;
  sync::RequestId request = 0;
};

struct BuyResult {
  std::optional<AppErrc> error;
  std::optional<Listing> listing;  // as bought; seller is the contact
  SimTime issued_at = 0.0;
  SimTime completed_at = 0.0;
};

struct SearchReply {
  std::optional<AppErrc> error;
  std::vector<Listing> listings;
  std::vector<std::string> sms;
  SimTime issued_at = 0.0;
  SimTime completed_at = 0.0;
};

struct Transaction {
  SimTime at = 0.0;
  std::string listing_id;
  std::string buyer;
  std::string seller;
  std::uint32_t quantity = 0;
};

/// SELL rides SLOWPUT, BUY rides FASTGET, SEARCH rides FASTSEARCH.
class Marketplace {
 public:
  static constexpr std::string_view kApp = "market";

  Marketplace(Engine& engine, sync::SyncService& sync, const identity::IdentityService* ids = nullptr);

  SellResult sell(NodeId node, const std::string& seller, const std::string& item,
                  std::uint32_t quantity, double price);
  void buy(NodeId node, const std::string& buyer, const std::string& listing_id,
           std::function<void(const BuyResult&)> done);
  void search(NodeId node, const std::string& buyer, const std::string& item,
              std::function<void(const SearchReply&)> done);
  /// Runs one SMS command and replies with the text sent back to the user.
  void handle_sms(NodeId node, const std::string& user, std::string_view text,
                  std::function<void(const std::vector<std::string>&)> reply);

  /// Listings this marketplace created, in creation order.
  [[nodiscard]] const std::vector<Listing>& listed() const noexcept { return listed_; }
  [[nodiscard]] const std::vector<Transaction>& transactions() const noexcept { return transactions_; }
  [[nodiscard]] std::uint64_t sold(std::string_view listing_id) const;
  [[nodiscard]] const identity::ApplicationRegistry& registry() const noexcept { return registry_; }

 private:
  Engine* engine_;
  sync::SyncService* sync_;
  const identity::IdentityService* ids_;
  identity::ApplicationRegistry registry_;
  std::vector<Listing> listed_;
  std::vector<Transaction> transactions_;
  std::map<std::string, std::uint64_t, std::less<>> sold_;  // committed at the cloud
  std::map<std::uint32_t, std::uint64_t> next_listing_;
};

// ---------------------------------------------------------------------------
// IVR social media

enum class Language : std::uint8_t { english, twi };
[[nodiscard]] std::string_view to_string(Language lang) noexcept;

struct VoiceMessage {
  std::string id;
  std::string author;
  sync::Payload audio;
  Language language = Language::english;
  SimTime recorded_at = 0.0;
};

struct RecordResult {
  std::optional<AppErrc> error;
  std::string message_id;
  SimTime acked_at = 0.0;
};

struct FetchResult {
  enum class Source : std::uint8_t { local_cache, cloud };
  std::optional<AppErrc> error;
  std::optional<VoiceMessage> message;
  Source source = Source::local_cache;
  SimTime issued_at = 0.0;
  SimTime completed_at = 0.0;
};

class Ivr {
 public:
  static constexpr std::string_view kApp = "ivr";

  Ivr(Engine& engine, sync::SyncService& sync, double session_s = 600.0);

  RecordResult record_message(NodeId node, const std::string& author, sync::Payload audio,
                              Language language = Language::english);
  /// Plays from the node's cache while its session is valid; otherwise
  /// FASTSEARCH for the newest message, then FASTGET its audio.
  void fetch_latest(NodeId node, const std::string& listener,
                    std::function<void(const FetchResult&)> done);

  [[nodiscard]] double session_s() const noexcept { return session_s_; }

 private:
  struct NodeCache {
    std::optional<SimTime> session_start;
    std::optional<VoiceMessage> latest;
  };

  Engine* engine_;
  sync::SyncService* sync_;
  double session_s_;
  std::map<NodeId, NodeCache> caches_;
  std::uint64_t next_id_ = 0;
};

[[nodiscard]] std::string encode_voice(const VoiceMessage& m);
[[nodiscard]] std::optional<VoiceMessage> decode_voice(std::string_view id, std::string_view value);

// ---------------------------------------------------------------------------
// Farm boundary sensing

struct FarmTrace {
  std::string farm_id;
  std::vector<std::pair<double, double>> waypoints;  // (lat, lon), walk order
  std::string crop;

  bool operator==(const FarmTrace&) const = default;
};

struct UploadResult {
  std::optional<AppErrc> error;
  SimTime acked_at = 0.0;
  sync::RequestId request = 0;
};

inline constexpr std::string_view kFarmApp = "farm";

/// SLOWPUT only: there is no download path.
UploadResult upload_farm(sync::SyncService& sync, NodeId node, const std::string& surveyor,
                         const FarmTrace& trace);
[[nodiscard]] std::string encode_farm(const FarmTrace& trace);
[[nodiscard]] std::optional<FarmTrace> decode_farm(std::string_view farm_id, std::string_view value);

// ---------------------------------------------------------------------------
// Scripted workload

struct MarketLoad {
  NodeId node;
  std::size_t sellers = 4;
  std::size_t buyers = 3;
  double sell_mean_s = 60.0;
  double buy_mean_s = 60.0;
  double search_share = 0.0;  // fraction of buyer actions that are SEARCH
  std::vector<std::string> items{"maize", "yam", "cassava", "cocoa"};
};

struct FileLoad {
  NodeId node;
  std::uint64_t bytes = 1 << 20;
  double interval_s = 60.0;  // 0: backlog only
  std::size_t backlog = 0;   // files queued at t = 0
  std::string app = "file";
};

struct SmsLoad {
  NodeId node;
  std::size_t users = 5;
  double mean_s = 60.0;
  std::uint64_t bytes = 140;
};

struct MessageLoad {
  std::size_t users_per_node = 2;
  double mean_s = 300.0;  // per user
};

struct Workload {
  std::vector<MarketLoad> market;
  std::vector<FileLoad> files;
  std::vector<SmsLoad> sms;
  std::optional<MessageLoad> messages;
  /// No new actions start after this time (defaults to the horizon).
  std::optional<SimTime> active_until;
};

struct WorkloadStats {
  std::uint64_t sells = 0;
  std::uint64_t sells_rejected = 0;
  std::uint64_t buys = 0;
  std::uint64_t buys_ok = 0;
  std::uint64_t buys_failed = 0;
  std::uint64_t searches = 0;
  std::uint64_t files = 0;
  std::uint64_t sms = 0;
  std::uint64_t messages = 0;
  std::vector<std::string> message_ids;
};

/// Drives a Workload on an engine. Users get identities at start.
class WorkloadDriver {
 public:
  WorkloadDriver(Engine& engine, topology::Topology& topo, identity::IdentityService& ids,
                 sync::SyncService& sync, Workload workload, std::uint64_t seed);

  void start(SimTime horizon);

  [[nodiscard]] const Marketplace& market() const noexcept { return market_; }
  [[nodiscard]] const WorkloadStats& stats() const noexcept { return stats_; }

 private:
  struct User {
    std::string name;
    NodeId node;
  };

  std::string enroll(NodeId node, const std::string& prefix);
  bool active() const;
  void schedule_sell(std::size_t load, std::size_t seller);
  void schedule_buy(std::size_t load, std::size_t buyer);
  void schedule_file(std::size_t load);
  void schedule_sms(std::size_t load, std::size_t user);
  void schedule_message(std::size_t user);

  Engine* engine_;
  topology::Topology* topo_;
  identity::IdentityService* ids_;
  sync::SyncService* sync_;
  Workload workload_;
  std::uint64_t seed_;
  Marketplace market_;
  WorkloadStats stats_;
  std::vector<std::vector<User>> sellers_;
  std::vector<std::vector<User>> buyers_;
  std::vector<std::vector<User>> sms_users_;
  std::vector<User> message_users_;
  std::map<std::string, Rng> rngs_;
  std::uint64_t next_imsi_ = 0;
  std::uint64_t file_seq_ = 0;
  std::uint64_t msg_seq_ = 0;
  SimTime until_ = 0.0;

  Rng& rng(const std::string& stream);
};

}  // namespace greenlinks::apps
