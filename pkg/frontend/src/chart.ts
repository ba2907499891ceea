// Minimal canvas line chart for the report-radius trace.

export function drawRadiusChart(
  canvas: HTMLCanvasElement,
  points: Array<{ t: number; radius: number }>,
  minIndex: number | null,
): void {
  let ctx: CanvasRenderingContext2D | null;
  try {
    ctx = canvas.getContext("2d");
  } catch {
    return; // jsdom and other contexts without 2D canvas support
  }
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  if (points.length === 0) return;
  const pad = 24;
  const maxR = Math.max(...points.map((p) => p.radius), 1e-12);
  const maxT = Math.max(points.length, 1);
  const px = (t: number) => pad + ((t - 1) / Math.max(maxT - 1, 1)) * (w - 2 * pad);
  const py = (r: number) => h - pad - (r / maxR) * (h - 2 * pad);

  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.stroke();

  ctx.strokeStyle = "#2b6cb0";
  ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach((p, i) => {
    const x = px(p.t);
    const y = py(p.radius);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();

  ctx.fillStyle = "#2b6cb0";
  for (const p of points) {
    ctx.beginPath();
    ctx.arc(px(p.t), py(p.radius), 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }

  if (minIndex !== null && points[minIndex]) {
    const p = points[minIndex];
    ctx.strokeStyle = "#c53030";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(px(p.t), py(p.radius), 6, 0, 2 * Math.PI);
    ctx.stroke();
  }
}
