//! Built-in network descriptions: CIFAR-10 adaptations of MobileNetV2 and
//! EfficientNet-B0, plus a tiny demo chain for quick runs.
//!
//! Both CIFAR adaptations keep 32x32 inputs by dropping the stem stride and
//! the first stage's downsampling (the standard small-image adaptation),
//! ending at 4x4 before global pooling. Global sum pooling is expressed as
//! a depthwise layer covering the full 4x4 extent so the chain stays a
//! plain layer sequence, and squeeze-excitation blocks are omitted; neither
//! carries pair-eligible weights.

use crate::layer::LayerKind;
use crate::netspec::{NetLayer, NetworkSpec};

#[allow(clippy::too_many_arguments)]
fn layer(
    id: String,
    kind: LayerKind,
    hw: usize,
    c: usize,
    n: usize,
    k: usize,
    stride: usize,
    pad: usize,
    fcc: bool,
) -> NetLayer {
    let vec_len = match kind {
        LayerKind::Std => k * k * c,
        LayerKind::Pw | LayerKind::Fc => c,
        LayerKind::Dw => k * k,
    };
    // Right shift sized so a worst-case window sum requantizes into i8.
    let shift = (usize::BITS - (vec_len - 1).leading_zeros()) + 7;
    NetLayer {
        id,
        kind,
        h: hw,
        w: hw,
        c,
        n,
        k,
        stride,
        pad,
        fcc,
        shift,
    }
}

struct Builder {
    layers: Vec<NetLayer>,
    hw: usize,
    cin: usize,
}

impl Builder {
    fn new(hw: usize) -> Self {
        Builder {
            layers: Vec::new(),
            hw,
            cin: 3,
        }
    }

    fn std(&mut self, id: &str, n: usize, k: usize, stride: usize) {
        let pad = k / 2;
        self.layers.push(layer(
            id.into(),
            LayerKind::Std,
            self.hw,
            self.cin,
            n,
            k,
            stride,
            pad,
            true,
        ));
        self.hw = (self.hw + 2 * pad - k) / stride + 1;
        self.cin = n;
    }

    fn pw(&mut self, id: &str, n: usize) {
        self.layers.push(layer(
            id.into(),
            LayerKind::Pw,
            self.hw,
            self.cin,
            n,
            1,
            1,
            0,
            true,
        ));
        self.cin = n;
    }

    fn dw(&mut self, id: &str, k: usize, stride: usize) {
        let pad = k / 2;
        self.layers.push(layer(
            id.into(),
            LayerKind::Dw,
            self.hw,
            self.cin,
            self.cin,
            k,
            stride,
            pad,
            true,
        ));
        self.hw = (self.hw + 2 * pad - k) / stride + 1;
    }

    /// Inverted residual block: optional expansion, depthwise, projection.
    fn mbconv(&mut self, tag: &str, t: usize, c_out: usize, k: usize, stride: usize) {
        if t != 1 {
            self.pw(&format!("{tag}_expand"), t * self.cin);
        }
        self.dw(&format!("{tag}_dw"), k, stride);
        self.pw(&format!("{tag}_project"), c_out);
    }

    /// Global sum pool over the remaining extent plus the classifier head.
    fn pool_and_fc(&mut self, classes: usize) {
        let k = self.hw;
        self.layers.push(layer(
            "pool".into(),
            LayerKind::Dw,
            self.hw,
            self.cin,
            self.cin,
            k,
            1,
            0,
            false,
        ));
        self.hw = 1;
        self.layers.push(layer(
            "fc".into(),
            LayerKind::Fc,
            1,
            self.cin,
            classes,
            1,
            1,
            0,
            false,
        ));
    }

    fn finish(self, name: &str) -> NetworkSpec {
        NetworkSpec {
            name: name.into(),
            features: None,
            layers: self.layers,
        }
    }
}

/// MobileNetV2 for CIFAR-10: stem stride 1 and no downsampling in the
/// 24-channel stage, giving 32-16-8-4 spatial progression.
pub fn mobilenet_v2_cifar10() -> NetworkSpec {
    let mut b = Builder::new(32);
    b.std("stem", 32, 3, 1);
    // (expansion t, output channels, repeats, first stride)
    let stages: [(usize, usize, usize, usize); 7] = [
        (1, 16, 1, 1),
        (6, 24, 2, 1),
        (6, 32, 3, 2),
        (6, 64, 4, 2),
        (6, 96, 3, 1),
        (6, 160, 3, 2),
        (6, 320, 1, 1),
    ];
    for (s_idx, (t, c_out, repeats, stride)) in stages.into_iter().enumerate() {
        for r in 0..repeats {
            let tag = format!("s{}b{}", s_idx + 1, r + 1);
            b.mbconv(&tag, t, c_out, 3, if r == 0 { stride } else { 1 });
        }
    }
    b.pw("head", 1280);
    b.pool_and_fc(10);
    b.finish("mobilenet_v2_cifar10")
}

/// EfficientNet-B0 for CIFAR-10: stem stride 1 and no downsampling in the
/// 24-channel stage (the same small-image adaptation), 5x5 kernels kept.
pub fn efficientnet_b0_cifar10() -> NetworkSpec {
    let mut b = Builder::new(32);
    b.std("stem", 32, 3, 1);
    // (expansion t, output channels, repeats, first stride, kernel)
    let stages: [(usize, usize, usize, usize, usize); 7] = [
        (1, 16, 1, 1, 3),
        (6, 24, 2, 1, 3),
        (6, 40, 2, 2, 5),
        (6, 80, 3, 2, 3),
        (6, 112, 3, 1, 5),
        (6, 192, 4, 2, 5),
        (6, 320, 1, 1, 3),
    ];
    for (s_idx, (t, c_out, repeats, stride, k)) in stages.into_iter().enumerate() {
        for r in 0..repeats {
            let tag = format!("s{}b{}", s_idx + 1, r + 1);
            b.mbconv(&tag, t, c_out, k, if r == 0 { stride } else { 1 });
        }
    }
    b.pw("head", 1280);
    b.pool_and_fc(10);
    b.finish("efficientnet_b0_cifar10")
}

/// Five-layer chain small enough for instant full simulation.
pub fn demo_net() -> NetworkSpec {
    let mut b = Builder::new(4);
    b.std("conv", 8, 3, 1);
    b.dw("dw", 3, 1);
    b.pw("pw", 16);
    b.pool_and_fc(10);
    b.finish("demo")
}
