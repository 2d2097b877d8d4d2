"""Central finite differences against autograd, one parameter tensor at a time."""
import numpy as np
import torch


def relative_errors(model, loss_fn, eps=1e-6, max_coords=150, seed=0):
    """Map parameter name -> ||g_autograd - g_fd|| / max(||g_autograd||, ||g_fd||) over sampled coordinates."""
    rng = np.random.default_rng(seed)
    model.zero_grad()
    loss = loss_fn()
    loss.backward()
    out = {}
    for name, p in model.named_parameters():
        analytic = p.grad.detach().clone().reshape(-1) if p.grad is not None else torch.zeros(p.numel(), dtype=p.dtype)
        n = p.numel()
        coords = np.arange(n) if n <= max_coords else rng.choice(n, max_coords, replace=False)
        flat = p.data.view(-1)
        fd = torch.zeros(len(coords), dtype=torch.float64)
        with torch.no_grad():
            for j, c in enumerate(coords):
                orig = flat[c].item()
                flat[c] = orig + eps
                up = loss_fn().item()
                flat[c] = orig - eps
                down = loss_fn().item()
                flat[c] = orig
                fd[j] = (up - down) / (2 * eps)
        a = analytic[torch.as_tensor(coords)]
        scale = max(a.norm().item(), fd.norm().item())
        out[name] = 0.0 if scale < 1e-10 else (a - fd).norm().item() / scale
    return out
