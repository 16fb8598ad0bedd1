public class LoadPlugin {
    public static void main(String[] args) {
        String name = args[0];
        Class<?> plugin = Class.forName(name);
        System.out.println("loaded " + plugin.getName());
    }
}
