#include "factweave/rgcn.hpp"

#include "factweave/error.hpp"

namespace factweave {

ValueId rgcn_layer(Tape& tape, ValueId h_in, const RgcnLayerIds& layer, std::size_t node_count,
                   const Tensor* dropout_mask) {
  const std::size_t d = tape.value(h_in).cols();
  if (tape.value(layer.self_weight).rows() != d) {
    throw DimensionError("rgcn layer width mismatch: input " + tape.value(h_in).shape_str() +
                         " vs self weight " + tape.value(layer.self_weight).shape_str());
  }

  ValueId acc = tape.matmul(h_in, layer.self_weight);
  for (const RgcnLayerIds::Relation& rel : layer.relations) {
    if (!rel.edges || rel.edges->empty()) continue;  // empty neighbor sets contribute nothing
    ValueId messages = tape.aggregate(tape.matmul(h_in, rel.weight), rel.edges, node_count);
    acc = tape.add(acc, messages);
  }
  ValueId activated = tape.gelu(acc);
  if (dropout_mask != nullptr) {
    return tape.mul(activated, tape.constant(*dropout_mask));
  }
  return activated;
}

ValueId rgcn_forward(Tape& tape, ValueId h0, const std::vector<RgcnLayerIds>& layers,
                     std::size_t node_count, const std::vector<Tensor>* dropout_masks) {
  if (dropout_masks != nullptr && dropout_masks->size() != layers.size()) {
    throw ContractError("rgcn_forward needs one dropout mask per layer: got " +
                        std::to_string(dropout_masks->size()) + " for " +
                        std::to_string(layers.size()) + " layers");
  }
  ValueId h = h0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor* mask = dropout_masks ? &(*dropout_masks)[l] : nullptr;
    h = rgcn_layer(tape, h, layers[l], node_count, mask);
  }
  return h;
}

std::string rgcn_weight_name(std::size_t layer, RelationKind r) {
  return "rgcn.l" + std::to_string(layer) + ".rel" + relation_name(r);
}

std::string rgcn_shared_weight_name(std::size_t layer) {
  return "rgcn.l" + std::to_string(layer) + ".relshared";
}

std::string rgcn_self_name(std::size_t layer) {
  return "rgcn.l" + std::to_string(layer) + ".self";
}

}  // namespace factweave
