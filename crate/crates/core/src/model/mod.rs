//! Parameters, heads, loss terms and the per-sample training graph.

mod forward;
mod heads;
mod loss;
mod params;

pub use forward::{
    mask_gradient, tubelet_weights, unit_gradient, unit_loss, unit_loss_value, FrameSupervision, LossConfig,
    LossParts, TrainUnit, UnitFrame, FRAME_CENTER,
};
pub use heads::{hidden_preactivations, mlp_forward, object_scores, object_scores_styled};
pub use loss::{
    action_logits, action_logits_with, assign_supervised, bce, class_probs, loss_act, loss_act_with, loss_obj,
    loss_obj_with, loss_supervised, loss_supervised_with, loss_total, one_hot, HyperWeights, LossStyle,
    SupervisedPick, LOG_FLOOR, SUPERVISED_NEG_RATIO, SUPERVISED_POS_IOU,
};
pub use params::{Dims, Group, Mlp, MlpDims, Params};
