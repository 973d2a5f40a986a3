#pragma once

#include <queue>
#include <vector>

namespace ohm {

// Unit-capacity max-flow via BFS augmenting paths. Arc capacities are 0/1,
// so each augmentation pushes one unit and the total work is O(flow * arcs).
class UnitFlowGraph {
 public:
  explicit UnitFlowGraph(int n) : head_(n, -1) {}

  int n() const { return static_cast<int>(head_.size()); }

  // returns arc id; payload tags arcs that correspond to network edges
  int add_arc(int from, int to, int payload = -1) {
    const int id = static_cast<int>(to_.size());
    to_.push_back(to);
    cap_.push_back(1);
    payload_.push_back(payload);
    next_.push_back(head_[from]);
    head_[from] = id;
    // residual arc
    to_.push_back(from);
    cap_.push_back(0);
    payload_.push_back(payload);
    next_.push_back(head_[to]);
    head_[to] = id + 1;
    return id;
  }

  int max_flow(int source, int sink) {
    int flow = 0;
    std::vector<int> pred_arc(n());
    while (true) {
      std::fill(pred_arc.begin(), pred_arc.end(), -1);
      std::queue<int> q;
      q.push(source);
      pred_arc[source] = -2;
      bool reached = false;
      while (!q.empty() && !reached) {
        const int v = q.front();
        q.pop();
        for (int a = head_[v]; a != -1; a = next_[a]) {
          if (cap_[a] <= 0 || pred_arc[to_[a]] != -1) continue;
          pred_arc[to_[a]] = a;
          if (to_[a] == sink) {
            reached = true;
            break;
          }
          q.push(to_[a]);
        }
      }
      if (!reached) break;
      for (int v = sink; v != source;) {
        const int a = pred_arc[v];
        --cap_[a];
        ++cap_[a ^ 1];
        v = to_[a ^ 1];
      }
      ++flow;
    }
    return flow;
  }

  // Decomposes the current integral flow into source->sink paths and reports
  // the payload sequence of each path. Consumes the flow.
  std::vector<std::vector<int>> decompose(int source, int sink) {
    std::vector<std::vector<int>> paths;
    while (true) {
      std::vector<int> payloads;
      int v = source;
      bool stuck = false;
      std::size_t steps = 0;
      while (v != sink) {
        if (++steps > to_.size()) {
          stuck = true;  // residual bookkeeping left a flow cycle
          break;
        }
        int chosen = -1;
        for (int a = head_[v]; a != -1; a = next_[a]) {
          if ((a & 1) == 0 && cap_[a] == 0) {  // forward arc carrying flow
            chosen = a;
            break;
          }
        }
        if (chosen == -1) {
          stuck = true;
          break;
        }
        ++cap_[chosen];  // consume
        --cap_[chosen ^ 1];
        if (payload_[chosen] >= 0) payloads.push_back(payload_[chosen]);
        v = to_[chosen];
      }
      if (stuck) break;
      paths.push_back(std::move(payloads));
    }
    return paths;
  }

 private:
  std::vector<int> head_;
  std::vector<int> to_, cap_, payload_, next_;
};

}  // namespace ohm
