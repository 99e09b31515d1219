/** Browser entry point. The service origin defaults to the page's own and
 * can be overridden with ?service=http://host:port for a console opened
 * straight from the filesystem. */

import { ServiceClient } from "./api.js";
import { ConsoleController } from "./controller.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "";
const root = document.getElementById("app");
if (root !== null) {
  const controller = new ConsoleController(root, new ServiceClient(baseUrl));
  void controller.init();
}
