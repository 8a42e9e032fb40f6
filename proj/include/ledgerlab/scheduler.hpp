#pragma once

#include <ledgerlab/types.hpp>

#include <cstdint>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

namespace ledgerlab {

/// Discrete-event queue. Entries with equal ticks pop in push order, so a
/// run is a pure function of the pushes made.
template <class Action>
class Scheduler
{
public:
   struct Entry
   {
      Tick at;
      std::uint64_t seq;
      Action action;
   };

   void push(Tick at, Action action) { queue_.push(Entry{at, next_seq_++, std::move(action)}); }

   bool empty() const { return queue_.empty(); }
   std::size_t size() const { return queue_.size(); }
   Tick now() const { return now_; }
   Tick next_tick() const { return queue_.top().at; }

   /// Pops the earliest entry and advances the clock to it.
   Entry pop()
   {
      Entry e = std::move(const_cast<Entry&>(queue_.top()));
      queue_.pop();
      now_ = e.at;
      return e;
   }

private:
   struct Later
   {
      bool operator()(const Entry& a, const Entry& b) const
      {
         return a.at != b.at ? a.at > b.at : a.seq > b.seq;
      }
   };

   std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
   std::uint64_t next_seq_ = 0;
   Tick now_ = 0;
};

/// Message latency: base plus uniform jitter in [0, jitter].
struct LatencyModel
{
   Tick base = 2;
   Tick jitter = 2;

   bool operator==(const LatencyModel&) const = default;
};

} // namespace ledgerlab
