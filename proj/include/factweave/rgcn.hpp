#pragma once

#include <string>
#include <vector>

#include "factweave/graph.hpp"
#include "factweave/tensor.hpp"

namespace factweave {

/// One relational layer on the tape: a weight per relation family plus the
/// self transform. The merged-relation ablation passes a single family
/// holding the union of all edges.
struct RgcnLayerIds {
  struct Relation {
    ValueId weight;  // d x d
    EdgeListPtr edges;
  };
  std::vector<Relation> relations;
  ValueId self_weight;  // d x d
};

/// h_i' = Dropout(GELU( sum_r 1/|N_i^r| sum_{j in N_i^r} h_j W_r + h_i W_0 )),
/// neighbors read over incoming directed edges per relation. Pass a null
/// mask for eval mode.
ValueId rgcn_layer(Tape& tape, ValueId h_in, const RgcnLayerIds& layer, std::size_t node_count,
                   const Tensor* dropout_mask);

/// L sequential layers; L = 0 returns the input. In train mode supply one
/// mask per layer.
ValueId rgcn_forward(Tape& tape, ValueId h0, const std::vector<RgcnLayerIds>& layers,
                     std::size_t node_count, const std::vector<Tensor>* dropout_masks);

// Checkpoint tensor names.
std::string rgcn_weight_name(std::size_t layer, RelationKind r);
std::string rgcn_shared_weight_name(std::size_t layer);
std::string rgcn_self_name(std::size_t layer);

}  // namespace factweave
