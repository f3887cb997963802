/** Browser entry point: mount the console against the page's own origin
 * (the gateway serves both the API and this bundle). */

import { DashboardApp } from "./app.js";
import { GatewayClient } from "./gateway.js";

window.addEventListener("load", () => {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app mount point");
  }
  const app = new DashboardApp(root, new GatewayClient(location.origin));
  void app.start();
});
