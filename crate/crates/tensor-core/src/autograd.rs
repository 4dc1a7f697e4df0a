//! Reverse-mode differentiation over the recorded operation graph.

use std::collections::HashSet;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// The operations reachable from a root, in execution (topological) order:
/// every operand appears before the node that consumed it.
pub struct Graph {
    order: Vec<Tensor>,
}

impl Graph {
    /// Collects the tracked subgraph below `root` by iterative post-order
    /// traversal.
    pub fn trace(root: &Tensor) -> Graph {
        let mut order = Vec::new();
        let mut visited: HashSet<usize> = HashSet::new();
        // (node, child_cursor) stack; a node is emitted once all parents are.
        let mut stack: Vec<(Tensor, usize)> = vec![(root.clone(), 0)];
        visited.insert(root.node_id());
        while let Some((node, cursor)) = stack.pop() {
            let parents = node.parents();
            if cursor < parents.len() {
                let next = parents[cursor].clone();
                stack.push((node, cursor + 1));
                if next.requires_grad() && visited.insert(next.node_id()) {
                    stack.push((next, 0));
                }
            } else {
                order.push(node);
            }
        }
        Graph { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Nodes in recorded order (operands before results).
    pub fn nodes(&self) -> &[Tensor] {
        &self.order
    }
}

/// Populates the gradients of every tracked tensor the scalar `loss`
/// depends on.
///
/// Each node is visited exactly once, in reverse topological order, so a
/// tensor used several times (skip connections) receives the sum of all its
/// downstream contributions before its own backward function runs. Calling
/// this twice on the same root is rejected; re-run the forward pass to
/// record a fresh graph.
pub fn backward(loss: &Tensor) -> Result<()> {
    if loss.numel() != 1 {
        return Err(TensorError::NonScalar(loss.shape().to_vec()));
    }
    if loss.is_consumed() {
        return Err(TensorError::GraphConsumed);
    }
    loss.mark_consumed();
    if !loss.requires_grad() {
        // Constant loss: nothing depends on any parameter.
        return Ok(());
    }

    let graph = Graph::trace(loss);
    loss.accumulate_grad(&[1.0]);
    for node in graph.nodes().iter().rev() {
        if let Some(backward_fn) = node.backward_fn() {
            let upstream = node
                .grad()
                .expect("interior node missing gradient during backward");
            backward_fn(&upstream);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;

    #[test]
    fn backward_of_sum_is_ones() {
        let x = Tensor::param(&[3], vec![1.0, -2.0, 7.5]).unwrap();
        let loss = ops::sum(&x).unwrap();
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_sum_of_squares() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let sq = ops::mul(&x, &x).unwrap();
        let loss = ops::sum(&sq).unwrap();
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let y = ops::relu(&x).unwrap();
        assert!(matches!(backward(&y), Err(TensorError::NonScalar(_))));
    }

    #[test]
    fn second_backward_without_rerecording_rejected() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let loss = ops::sum(&x).unwrap();
        backward(&loss).unwrap();
        assert_eq!(backward(&loss), Err(TensorError::GraphConsumed));

        // A fresh forward records a fresh graph and is accepted again;
        // gradients accumulate.
        let loss2 = ops::sum(&x).unwrap();
        backward(&loss2).unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn trace_orders_operands_before_results() {
        let x = Tensor::param(&[2], vec![0.3, 0.7]).unwrap();
        let a = ops::relu(&x).unwrap();
        let b = ops::mul(&a, &a).unwrap();
        let loss = ops::sum(&b).unwrap();
        let graph = Graph::trace(&loss);

        let pos: std::collections::HashMap<usize, usize> = graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.node_id(), i))
            .collect();
        for node in graph.nodes() {
            for parent in node.parents() {
                if parent.requires_grad() {
                    assert!(pos[&parent.node_id()] < pos[&node.node_id()]);
                }
            }
        }
        // x, relu, mul, sum
        assert_eq!(graph.len(), 4);
    }

    #[test]
    fn shared_operand_receives_both_contributions() {
        // loss = sum(x * x) + sum(x) -> dx = 2x + 1
        let x = Tensor::param(&[2], vec![3.0, -1.0]).unwrap();
        let sq = ops::mul(&x, &x).unwrap();
        let a = ops::sum(&sq).unwrap();
        let b = ops::sum(&x).unwrap();
        let loss = ops::add(&a, &b).unwrap();
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![7.0, -1.0]);
    }
}
